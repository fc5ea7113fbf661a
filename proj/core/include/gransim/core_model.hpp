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

#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace gransim {

using NodeId = std::uint32_t;
using HostId = std::uint32_t;
using LinkId = std::uint32_t;
using FlowId = std::uint32_t;
using Bits = std::int64_t;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Raised for invalid user-supplied parameters (bad counts, unknown keys, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a run cannot make progress or an internal contract breaks.
class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Tier : std::uint8_t { Host, Leaf, Spine };

std::string to_string(Tier tier);

/// A directed simplex channel. Every physical cable is two of these.
struct Link {
  NodeId src = 0;
  NodeId dst = 0;
  double capacity_bps = 0.0;
  double latency_s = 0.0;
};

/// Two-tier leaf-spine Clos fabric.
///
/// Node ids are dense: hosts occupy [0, host_count), leaves follow, then
/// spines. Host h attaches to leaf h / hosts_per_leaf.
class Topology {
 public:
  std::size_t host_count() const { return host_count_; }
  std::size_t leaf_count() const { return leaf_count_; }
  std::size_t spine_count() const { return spine_count_; }
  std::size_t hosts_per_leaf() const { return hosts_per_leaf_; }
  std::size_t node_count() const { return host_count_ + leaf_count_ + spine_count_; }

  std::vector<HostId> hosts() const;
  std::vector<NodeId> switches() const;
  const std::vector<Link>& links() const { return links_; }
  const Link& link(LinkId id) const { return links_.at(id); }

  Tier tier(NodeId node) const;
  bool is_switch(NodeId node) const { return tier(node) != Tier::Host; }
  /// True when the link leaves a switch, i.e. it is served by a switch egress port.
  bool is_switch_port(LinkId id) const { return is_switch(links_.at(id).src); }

  NodeId leaf_node(std::size_t leaf) const { return static_cast<NodeId>(host_count_ + leaf); }
  NodeId spine_node(std::size_t spine) const {
    return static_cast<NodeId>(host_count_ + leaf_count_ + spine);
  }
  std::size_t leaf_of(HostId host) const;

  LinkId host_uplink(HostId host) const { return host_up_.at(host); }
  LinkId host_downlink(HostId host) const { return host_down_.at(host); }
  LinkId leaf_to_spine(std::size_t leaf, std::size_t spine) const {
    return leaf_up_.at(leaf * spine_count_ + spine);
  }
  LinkId spine_to_leaf(std::size_t spine, std::size_t leaf) const {
    return spine_down_.at(spine * leaf_count_ + leaf);
  }

  bool is_connected() const;
  /// FNV-1a over every structural field; equal hashes for equal fabrics.
  std::uint64_t structural_hash() const;
  /// Adjacency dump for debugging.
  nlohmann::json to_json() const;

 private:
  friend Topology build_leaf_spine(std::size_t, std::size_t, std::size_t, double, double);

  std::size_t host_count_ = 0;
  std::size_t leaf_count_ = 0;
  std::size_t spine_count_ = 0;
  std::size_t hosts_per_leaf_ = 0;
  std::vector<Link> links_;
  std::vector<LinkId> host_up_;
  std::vector<LinkId> host_down_;
  std::vector<LinkId> leaf_up_;
  std::vector<LinkId> spine_down_;
};

Topology build_leaf_spine(std::size_t leaves, std::size_t spines, std::size_t hosts_per_leaf,
                          double link_capacity_bps, double link_latency_s);

/// Ordered link ids from the source host to the destination host.
struct Path {
  std::vector<LinkId> links;

  std::size_t hops() const { return links.size(); }
  bool operator==(const Path&) const = default;
};

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Per-flow ECMP key: mix64(mix64(seed) ^ flow_id).
constexpr std::uint64_t ecmp_hash(std::uint64_t flow_id, std::uint64_t seed) {
  return mix64(mix64(seed) ^ flow_id);
}

/// Deterministic per-flow path. Same-leaf pairs stay below the spine layer;
/// cross-leaf pairs use spine ecmp_hash(flow_id, seed) % spines.
Path route(const Topology& topology, HostId src, HostId dst, FlowId flow_id, std::uint64_t seed);

/// Sum of propagation latencies plus one-packet serialization on every hop
/// after the first. This is the store-and-forward delay of the last packet
/// once it has left the sender.
double path_base_latency(const Topology& topology, const Path& path, Bits packet_bits);

bool is_valid_path(const Topology& topology, const Path& path, HostId src, HostId dst);

enum class FlowState : std::uint8_t { Pending, Active, Completed };

std::string to_string(FlowState state);

/// A point-to-point transfer as it appears in a schedule.
struct Flow {
  FlowId id = 0;
  HostId src = 0;
  HostId dst = 0;
  Bits size_bits = 0;
  double release_s = 0.0;
  double weight = 1.0;
  /// Cap applied to the measured rate when a flow enters a steady phase.
  double min_bandwidth_bps = kInfinity;
  std::vector<FlowId> deps;
};

/// Flows indexed by id (flows[i].id == i), plus their dependency edges.
struct FlowSchedule {
  std::vector<Flow> flows;

  std::size_t size() const { return flows.size(); }
  bool empty() const { return flows.empty(); }
  Bits total_bits() const;
};

/// Throws ConfigError on dangling ids, self loops, cycles, unknown hosts or
/// non-positive sizes.
void validate_schedule(const FlowSchedule& schedule, std::size_t host_count);

/// Kahn order; std::nullopt when the dependency graph has a cycle.
std::optional<std::vector<FlowId>> topological_order(const FlowSchedule& schedule);

/// Min-heap of timestamped events. Equal timestamps pop in insertion order.
template <typename Payload>
class EventQueue {
 public:
  struct Entry {
    double time;
    std::uint64_t seq;
    Payload payload;
  };

  void push(double time, Payload payload) {
    heap_.push_back(Entry{time, next_seq_++, std::move(payload)});
    std::push_heap(heap_.begin(), heap_.end(), Later{});
  }

  Entry pop() {
    std::pop_heap(heap_.begin(), heap_.end(), Later{});
    Entry top = std::move(heap_.back());
    heap_.pop_back();
    return top;
  }

  const Entry& top() const { return heap_.front(); }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  double next_time() const { return heap_.empty() ? kInfinity : heap_.front().time; }

  /// Adds `delta` to every entry accepted by `pred`, keeping sequence numbers.
  template <typename Pred>
  void shift_if(double delta, Pred pred) {
    for (auto& e : heap_) {
      if (pred(e.payload)) e.time += delta;
    }
    std::make_heap(heap_.begin(), heap_.end(), Later{});
  }

  template <typename Pred>
  void erase_if(Pred pred) {
    std::erase_if(heap_, [&](const Entry& e) { return pred(e.payload); });
    std::make_heap(heap_.begin(), heap_.end(), Later{});
  }

  template <typename Fn>
  void for_each(Fn fn) const {
    for (const auto& e : heap_) fn(e);
  }

 private:
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.seq > b.seq;
    }
  };

  std::vector<Entry> heap_;
  std::uint64_t next_seq_ = 0;
};

}  // namespace gransim
