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

#include "gransim/packet_engine.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace gransim {

namespace {

EngineEvent release_event(FlowId id) {
  EngineEvent ev;
  ev.kind = EngineEventKind::Release;
  ev.flow = id;
  return ev;
}

}  // namespace

void PacketEngineConfig::validate() const {
  if (mtu_bits <= 0) throw ConfigError("engine.mtu_bits must be positive");
  if (header_bits < 0) throw ConfigError("engine.header_bits must be >= 0");
  if (ecn_threshold_bits < 0) throw ConfigError("engine.ecn_threshold_bits must be >= 0");
  if (!(dctcp_gain > 0.0 && dctcp_gain <= 1.0)) throw ConfigError("engine.dctcp_gain must be in (0, 1]");
  if (host_queue_packets < 0) throw ConfigError("engine.host_queue_packets must be >= 0");
  if (!(initial_alpha >= 0.0 && initial_alpha <= 1.0)) throw ConfigError("engine.initial_alpha must be in [0, 1]");
}

PacketEngine::PacketEngine(const Topology& topology, const FlowSchedule& schedule, PacketEngineConfig config)
    : topology_(&topology), schedule_(&schedule), config_(config) {
  config_.validate();
  validate_schedule(schedule, topology.host_count());

  const std::size_t n = schedule.size();
  dependents_.assign(n, {});
  state_.flows.resize(n);
  state_.ports.resize(topology.links().size());
  state_.link_tx_bits.assign(topology.links().size(), 0);
  state_.sample_baseline.assign(n, 0);

  const Bits full_packet = config_.mtu_bits + config_.header_bits;
  for (const Flow& f : schedule.flows) {
    FlowRuntime& rt = state_.flows[f.id];
    rt.unmet_deps = f.deps.size();
    for (FlowId d : f.deps) dependents_[d].push_back(f.id);
    rt.path = route(topology, f.src, f.dst, f.id, config_.seed);

    double bottleneck = kInfinity;
    for (LinkId l : rt.path.links) {
      rt.reverse_latency_s += topology.link(l).latency_s;
      bottleneck = std::min(bottleneck, topology.link(l).capacity_bps);
    }
    const double first_hop = static_cast<double>(full_packet) / topology.link(rt.path.links.front()).capacity_bps;
    const double rtt = first_hop + path_base_latency(topology, rt.path, full_packet) + rt.reverse_latency_s;
    rt.transport.bdp = std::max(1.0, bottleneck * rtt / static_cast<double>(full_packet));
    rt.transport.max_cwnd =
        rt.transport.bdp + static_cast<double>(config_.ecn_threshold_bits) / static_cast<double>(full_packet);
  }
  for (const Flow& f : schedule.flows) {
    if (f.deps.empty()) state_.events.push(f.release_s, release_event(f.id));
  }
}

void PacketEngine::run_until(double t_stop) {
  if (t_stop < state_.now) throw SimulationError("run_until: stop time precedes the clock");
  while (!state_.events.empty() && state_.events.next_time() <= t_stop) {
    auto entry = state_.events.pop();
    state_.now = entry.time;
    handle(entry.payload);
  }
  state_.now = t_stop;
}

void PacketEngine::run_to_completion() {
  while (!done() && !state_.events.empty()) {
    auto entry = state_.events.pop();
    state_.now = entry.time;
    handle(entry.payload);
  }
  if (!done()) throw SimulationError("packet engine stalled with unfinished flows");
}

void PacketEngine::handle(const EngineEvent& ev) {
  ++state_.events_processed;
  switch (ev.kind) {
    case EngineEventKind::Release: activate(ev.flow); break;
    case EngineEventKind::TxDone: on_tx_done(ev.port, ev.generation); break;
    case EngineEventKind::Arrive: on_arrive(ev.packet); break;
    case EngineEventKind::Ack: on_ack(ev.flow, ev.seq, ev.ecn); break;
  }
}

void PacketEngine::activate(FlowId id) {
  FlowRuntime& f = state_.flows[id];
  f.state = FlowState::Active;
  f.activation_s = state_.now;
  ++state_.active;
  f.transport.cwnd = f.transport.bdp;
  f.transport.alpha = config_.initial_alpha;
  state_.sample_baseline[id] = f.delivered_bits;
  try_send(id);
}

void PacketEngine::try_send(FlowId id) {
  FlowRuntime& f = state_.flows[id];
  if (f.state != FlowState::Active) return;
  const Bits size = schedule_->flows[id].size_bits;
  TransportState& t = f.transport;
  const auto window = static_cast<std::int64_t>(std::max(1.0, std::floor(t.cwnd)));
  const std::int64_t host_limit = config_.host_queue_packets;
  while (t.inflight < window && f.sent_bits < size && (host_limit == 0 || f.host_queued < host_limit)) {
    Packet p;
    p.flow = id;
    p.seq = f.next_seq++;
    p.payload = std::min(config_.mtu_bits, size - f.sent_bits);
    p.size = p.payload + config_.header_bits;
    f.sent_bits += p.payload;
    ++t.inflight;
    ++f.host_queued;
    enqueue(f.path.links.front(), p);
  }
}

void PacketEngine::enqueue(LinkId port, Packet packet) {
  PortQueue& q = state_.ports[port];
  if (!packet.synthetic && q.depth > config_.ecn_threshold_bits) {
    packet.ecn = true;
  }
  q.fifo.push_back(packet);
  q.depth += packet.size;
  if (q.fifo.size() == 1) start_service(port);
}

void PacketEngine::start_service(LinkId port) {
  const PortQueue& q = state_.ports[port];
  const double tx = static_cast<double>(q.fifo.front().size) / topology_->link(port).capacity_bps;
  EngineEvent ev;
  ev.kind = EngineEventKind::TxDone;
  ev.port = port;
  ev.generation = q.generation;
  state_.events.push(state_.now + tx, ev);
}

void PacketEngine::on_tx_done(LinkId port, std::uint64_t generation) {
  PortQueue& q = state_.ports[port];
  if (generation != q.generation || q.fifo.empty()) return;
  Packet p = q.fifo.front();
  q.fifo.pop_front();
  q.depth -= p.size;
  const bool left_host = !p.synthetic && p.hop == 0;
  if (!p.synthetic) {
    state_.link_tx_bits[port] += p.payload;
    ++p.hop;
    EngineEvent ev;
    ev.kind = EngineEventKind::Arrive;
    ev.packet = p;
    state_.events.push(state_.now + topology_->link(port).latency_s, ev);
  }
  if (!q.fifo.empty()) start_service(port);
  if (left_host) {
    --state_.flows[p.flow].host_queued;
    try_send(p.flow);
  }
}

void PacketEngine::on_arrive(Packet packet) {
  FlowRuntime& f = state_.flows[packet.flow];
  if (packet.hop < f.path.links.size()) {
    enqueue(f.path.links[packet.hop], packet);
    return;
  }
  if (f.state != FlowState::Active) return;
  credit_delivery(packet.flow, packet.payload);
  if (f.state != FlowState::Active) return;
  EngineEvent ack;
  ack.kind = EngineEventKind::Ack;
  ack.flow = packet.flow;
  ack.seq = packet.seq;
  ack.ecn = packet.ecn;
  state_.events.push(state_.now + f.reverse_latency_s, ack);
}

void PacketEngine::on_ack(FlowId id, std::int64_t seq, bool ecn) {
  FlowRuntime& f = state_.flows[id];
  if (f.state != FlowState::Active) return;
  TransportState& t = f.transport;
  --t.inflight;
  ++t.acked_in_window;
  if (ecn) ++t.marked_in_window;

  if (ecn) {
    if (seq >= t.cut_guard_seq) {
      t.cwnd = std::max(1.0, t.cwnd * (1.0 - t.alpha / 2.0));
      t.cut_guard_seq = f.next_seq;
    }
  } else {
    t.cwnd = std::min(t.max_cwnd, t.cwnd + 1.0 / t.cwnd);
  }
  if (seq >= t.window_end_seq) {
    const double frac = static_cast<double>(t.marked_in_window) / static_cast<double>(t.acked_in_window);
    t.alpha = (1.0 - config_.dctcp_gain) * t.alpha + config_.dctcp_gain * frac;
    t.acked_in_window = 0;
    t.marked_in_window = 0;
    t.window_end_seq = f.next_seq;
  }
  try_send(id);
}

void PacketEngine::credit_delivery(FlowId id, Bits payload) {
  FlowRuntime& f = state_.flows[id];
  f.delivered_bits += payload;
  if (f.delivered_bits == schedule_->flows[id].size_bits) complete(id, state_.now);
}

void PacketEngine::complete(FlowId id, double when) {
  FlowRuntime& f = state_.flows[id];
  f.state = FlowState::Completed;
  f.completion_s = when;
  --state_.active;
  ++state_.completed;
  for (FlowId c : dependents_[id]) {
    FlowRuntime& child = state_.flows[c];
    if (--child.unmet_deps == 0) {
      const double t = std::max(schedule_->flows[c].release_s, when);
      state_.events.push(t, release_event(c));
    }
  }
}

StateSample PacketEngine::sample_state(double window_s) {
  if (!(window_s > 0.0)) throw ConfigError("sample window must be positive");
  StateSample s;
  s.time = state_.now;
  s.window_s = window_s;
  for (FlowId id = 0; id < state_.flows.size(); ++id) {
    const FlowRuntime& f = state_.flows[id];
    if (f.state == FlowState::Active) {
      s.active.push_back(id);
      s.rate_bps.push_back(static_cast<double>(f.delivered_bits - state_.sample_baseline[id]) / window_s);
    }
    state_.sample_baseline[id] = f.delivered_bits;
  }
  s.port_depth.resize(state_.ports.size());
  for (LinkId l = 0; l < state_.ports.size(); ++l) s.port_depth[l] = state_.ports[l].depth;
  return s;
}

void PacketEngine::restore(const EngineSnapshot& snapshot, const std::map<LinkId, Bits>& queue_overrides) {
  if (snapshot.state.flows.size() != state_.flows.size() || snapshot.state.ports.size() != state_.ports.size()) {
    throw SimulationError("snapshot does not match this engine's schedule and topology");
  }
  state_ = snapshot.state;
  apply_queue_overrides(queue_overrides);
}

void PacketEngine::apply_queue_overrides(const std::map<LinkId, Bits>& queue_overrides) {
  for (const auto& [port, depth] : queue_overrides) {
    if (port >= state_.ports.size()) throw ConfigError("queue override on unknown port " + std::to_string(port));
    if (depth < 0) throw ConfigError("negative queue override on port " + std::to_string(port));
  }

  std::set<FlowId> credited;
  const Bits chunk = config_.mtu_bits + config_.header_bits;
  for (const auto& [port, target] : queue_overrides) {
    PortQueue& q = state_.ports[port];
    if (q.depth == target) continue;

    // Trim real backlog from the tail; trimmed packets count as delivered.
    while (q.depth > target && !q.fifo.empty()) {
      if (q.fifo.size() == 1) ++q.generation;
      Packet p = q.fifo.back();
      q.fifo.pop_back();
      q.depth -= p.size;
      if (p.synthetic) continue;
      FlowRuntime& f = state_.flows[p.flow];
      if (f.state != FlowState::Active) continue;
      --f.transport.inflight;
      if (p.hop == 0) --f.host_queued;
      credited.insert(p.flow);
      credit_delivery(p.flow, p.payload);
    }

    const bool serving = !q.fifo.empty();
    const std::vector<FlowId> owners = flows_through(port);
    std::size_t next_owner = 0;
    while (q.depth < target) {
      Packet p;
      p.synthetic = true;
      p.size = std::min(chunk, target - q.depth);
      p.flow = owners.empty() ? 0 : owners[next_owner++ % owners.size()];
      q.fifo.push_back(p);
      q.depth += p.size;
    }
    if (!serving && !q.fifo.empty()) start_service(port);
  }
  for (FlowId id : credited) try_send(id);
}

void PacketEngine::advance_flow_phase(double t_end, const std::vector<FlowAdvance>& progress) {
  const double delta = t_end - state_.now;
  if (delta < 0.0) throw SimulationError("advance_flow_phase: end precedes the clock");
  bool early_release = false;
  state_.events.for_each([&](const auto& e) {
    if (e.payload.kind == EngineEventKind::Release && e.time < t_end) early_release = true;
  });
  if (early_release) throw SimulationError("advance_flow_phase: a release falls inside the flow phase");

  state_.events.shift_if(delta, [](const EngineEvent& ev) { return ev.kind != EngineEventKind::Release; });
  state_.now = t_end;

  for (const FlowAdvance& a : progress) {
    FlowRuntime& f = state_.flows.at(a.flow);
    if (f.state != FlowState::Active) throw SimulationError("advance_flow_phase: flow is not active");
    const Bits size = schedule_->flows[a.flow].size_bits;
    if (a.bits < 0 || a.bits > size - f.sent_bits) {
      throw SimulationError("advance_flow_phase: progress exceeds remaining bits of flow " +
                            std::to_string(a.flow));
    }
    f.sent_bits += a.bits;
    f.delivered_bits += a.bits;
    for (LinkId l : f.path.links) state_.link_tx_bits[l] += a.bits;
    if (a.completes) {
      if (f.sent_bits != size) throw SimulationError("advance_flow_phase: finisher has bits left");
      // Packets still in flight become ghosts: they occupy queues but are not counted.
      f.delivered_bits = size;
      complete(a.flow, std::max(a.completion_s, t_end));
    }
  }
  for (FlowId id = 0; id < state_.flows.size(); ++id) state_.sample_baseline[id] = state_.flows[id].delivered_bits;
}

double PacketEngine::next_release_time() const {
  double t = kInfinity;
  state_.events.for_each([&](const auto& e) {
    if (e.payload.kind == EngineEventKind::Release) t = std::min(t, e.time);
  });
  return t;
}

std::vector<FlowId> PacketEngine::active_flows() const {
  std::vector<FlowId> out;
  for (FlowId id = 0; id < state_.flows.size(); ++id) {
    if (state_.flows[id].state == FlowState::Active) out.push_back(id);
  }
  return out;
}

std::vector<FlowId> PacketEngine::flows_through(LinkId link) const {
  std::vector<FlowId> out;
  for (FlowId id = 0; id < state_.flows.size(); ++id) {
    const FlowRuntime& f = state_.flows[id];
    if (f.state != FlowState::Active) continue;
    if (std::find(f.path.links.begin(), f.path.links.end(), link) != f.path.links.end()) out.push_back(id);
  }
  return out;
}

}  // namespace gransim
