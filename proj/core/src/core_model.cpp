/*
 * Copyright 2026 The gransim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "gransim/core_model.hpp"

#include <bit>
#include <cmath>
#include <deque>

namespace gransim {

std::string to_string(Tier tier) {
  switch (tier) {
    case Tier::Host: return "host";
    case Tier::Leaf: return "leaf";
    case Tier::Spine: return "spine";
  }
  return "unknown";
}

std::string to_string(FlowState state) {
  switch (state) {
    case FlowState::Pending: return "pending";
    case FlowState::Active: return "active";
    case FlowState::Completed: return "completed";
  }
  return "unknown";
}

Topology build_leaf_spine(std::size_t leaves, std::size_t spines, std::size_t hosts_per_leaf,
                          double link_capacity_bps, double link_latency_s) {
  if (leaves == 0 || spines == 0 || hosts_per_leaf == 0) {
    throw ConfigError("leaf-spine topology needs at least one leaf, spine and host per leaf");
  }
  if (!(link_capacity_bps > 0.0) || !std::isfinite(link_capacity_bps)) {
    throw ConfigError("link capacity must be positive and finite");
  }
  if (!(link_latency_s >= 0.0) || !std::isfinite(link_latency_s)) {
    throw ConfigError("link latency must be non-negative and finite");
  }

  Topology t;
  t.leaf_count_ = leaves;
  t.spine_count_ = spines;
  t.hosts_per_leaf_ = hosts_per_leaf;
  t.host_count_ = leaves * hosts_per_leaf;

  auto add = [&](NodeId src, NodeId dst) {
    t.links_.push_back(Link{src, dst, link_capacity_bps, link_latency_s});
    return static_cast<LinkId>(t.links_.size() - 1);
  };

  t.host_up_.resize(t.host_count_);
  t.host_down_.resize(t.host_count_);
  for (HostId h = 0; h < t.host_count_; ++h) {
    const NodeId leaf = t.leaf_node(h / hosts_per_leaf);
    t.host_up_[h] = add(h, leaf);
    t.host_down_[h] = add(leaf, h);
  }
  t.leaf_up_.resize(leaves * spines);
  t.spine_down_.resize(spines * leaves);
  for (std::size_t l = 0; l < leaves; ++l) {
    for (std::size_t s = 0; s < spines; ++s) {
      t.leaf_up_[l * spines + s] = add(t.leaf_node(l), t.spine_node(s));
      t.spine_down_[s * leaves + l] = add(t.spine_node(s), t.leaf_node(l));
    }
  }
  return t;
}

std::vector<HostId> Topology::hosts() const {
  std::vector<HostId> out(host_count_);
  for (HostId h = 0; h < host_count_; ++h) out[h] = h;
  return out;
}

std::vector<NodeId> Topology::switches() const {
  std::vector<NodeId> out;
  out.reserve(leaf_count_ + spine_count_);
  for (std::size_t i = 0; i < leaf_count_ + spine_count_; ++i) {
    out.push_back(static_cast<NodeId>(host_count_ + i));
  }
  return out;
}

Tier Topology::tier(NodeId node) const {
  if (node < host_count_) return Tier::Host;
  if (node < host_count_ + leaf_count_) return Tier::Leaf;
  if (node < node_count()) return Tier::Spine;
  throw std::out_of_range("node id " + std::to_string(node) + " outside topology");
}

std::size_t Topology::leaf_of(HostId host) const {
  if (host >= host_count_) throw ConfigError("unknown host " + std::to_string(host));
  return host / hosts_per_leaf_;
}

bool Topology::is_connected() const {
  const std::size_t n = node_count();
  if (n == 0) return false;
  std::vector<std::vector<NodeId>> adj(n);
  for (const auto& l : links_) adj[l.src].push_back(l.dst);
  std::vector<bool> seen(n, false);
  std::deque<NodeId> frontier{0};
  seen[0] = true;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    const NodeId u = frontier.front();
    frontier.pop_front();
    for (NodeId v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++reached;
        frontier.push_back(v);
      }
    }
  }
  return reached == n;
}

std::uint64_t Topology::structural_hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffU;
      h *= 1099511628211ULL;
    }
  };
  feed(host_count_);
  feed(leaf_count_);
  feed(spine_count_);
  feed(hosts_per_leaf_);
  for (const auto& l : links_) {
    feed(l.src);
    feed(l.dst);
    feed(std::bit_cast<std::uint64_t>(l.capacity_bps));
    feed(std::bit_cast<std::uint64_t>(l.latency_s));
  }
  return h;
}

nlohmann::json Topology::to_json() const {
  nlohmann::json nodes = nlohmann::json::array();
  for (NodeId n = 0; n < node_count(); ++n) {
    nodes.push_back({{"id", n}, {"tier", to_string(tier(n))}});
  }
  nlohmann::json links = nlohmann::json::array();
  for (LinkId i = 0; i < links_.size(); ++i) {
    const auto& l = links_[i];
    links.push_back({{"id", i},
                     {"src", l.src},
                     {"dst", l.dst},
                     {"capacity_bps", l.capacity_bps},
                     {"latency_s", l.latency_s}});
  }
  return {{"hosts", host_count_},
          {"leaves", leaf_count_},
          {"spines", spine_count_},
          {"hosts_per_leaf", hosts_per_leaf_},
          {"nodes", std::move(nodes)},
          {"links", std::move(links)}};
}

Path route(const Topology& topology, HostId src, HostId dst, FlowId flow_id, std::uint64_t seed) {
  if (src >= topology.host_count() || dst >= topology.host_count()) {
    throw ConfigError("route: unknown host " + std::to_string(std::max(src, dst)));
  }
  if (src == dst) throw ConfigError("route: source equals destination (host " + std::to_string(src) + ")");

  const std::size_t src_leaf = topology.leaf_of(src);
  const std::size_t dst_leaf = topology.leaf_of(dst);
  Path p;
  p.links.push_back(topology.host_uplink(src));
  if (src_leaf != dst_leaf) {
    const std::size_t spine = ecmp_hash(flow_id, seed) % topology.spine_count();
    p.links.push_back(topology.leaf_to_spine(src_leaf, spine));
    p.links.push_back(topology.spine_to_leaf(spine, dst_leaf));
  }
  p.links.push_back(topology.host_downlink(dst));
  return p;
}

double path_base_latency(const Topology& topology, const Path& path, Bits packet_bits) {
  double total = 0.0;
  for (std::size_t i = 0; i < path.links.size(); ++i) {
    const auto& l = topology.link(path.links[i]);
    total += l.latency_s;
    if (i > 0) total += static_cast<double>(packet_bits) / l.capacity_bps;
  }
  return total;
}

bool is_valid_path(const Topology& topology, const Path& path, HostId src, HostId dst) {
  if (path.links.empty()) return false;
  if (topology.link(path.links.front()).src != src) return false;
  if (topology.link(path.links.back()).dst != dst) return false;
  for (std::size_t i = 0; i < path.links.size(); ++i) {
    const auto& l = topology.link(path.links[i]);
    if (!(l.capacity_bps > 0.0)) return false;
    if (i + 1 < path.links.size() && l.dst != topology.link(path.links[i + 1]).src) return false;
  }
  return true;
}

Bits FlowSchedule::total_bits() const {
  Bits total = 0;
  for (const auto& f : flows) total += f.size_bits;
  return total;
}

std::optional<std::vector<FlowId>> topological_order(const FlowSchedule& schedule) {
  const std::size_t n = schedule.flows.size();
  std::vector<std::size_t> indegree(n, 0);
  std::vector<std::vector<FlowId>> children(n);
  for (const auto& f : schedule.flows) {
    for (FlowId d : f.deps) {
      if (d >= n) return std::nullopt;
      children[d].push_back(f.id);
      ++indegree[f.id];
    }
  }
  std::deque<FlowId> ready;
  for (FlowId i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push_back(i);
  }
  std::vector<FlowId> order;
  order.reserve(n);
  while (!ready.empty()) {
    const FlowId u = ready.front();
    ready.pop_front();
    order.push_back(u);
    for (FlowId c : children[u]) {
      if (--indegree[c] == 0) ready.push_back(c);
    }
  }
  if (order.size() != n) return std::nullopt;
  return order;
}

void validate_schedule(const FlowSchedule& schedule, std::size_t host_count) {
  const std::size_t n = schedule.flows.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& f = schedule.flows[i];
    const std::string where = "flow " + std::to_string(i);
    if (f.id != i) throw ConfigError(where + ": ids must be dense and equal to position");
    if (f.src >= host_count || f.dst >= host_count) throw ConfigError(where + ": unknown host");
    if (f.src == f.dst) throw ConfigError(where + ": source equals destination");
    if (f.size_bits <= 0) throw ConfigError(where + ": size must be positive");
    if (!(f.release_s >= 0.0) || !std::isfinite(f.release_s)) {
      throw ConfigError(where + ": release time must be finite and non-negative");
    }
    if (!(f.weight >= 0.0) || !std::isfinite(f.weight)) throw ConfigError(where + ": weight must be >= 0");
    if (!(f.min_bandwidth_bps >= 0.0)) throw ConfigError(where + ": min bandwidth must be >= 0");
    for (FlowId d : f.deps) {
      if (d >= n) throw ConfigError(where + ": dependency on unknown flow " + std::to_string(d));
      if (d == f.id) throw ConfigError(where + ": depends on itself");
    }
  }
  if (!topological_order(schedule)) throw ConfigError("flow dependency graph has a cycle");
}

}  // namespace gransim
