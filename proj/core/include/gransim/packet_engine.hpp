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

#include <cstdint>
#include <deque>
#include <map>
#include <vector>

#include "gransim/core_model.hpp"

namespace gransim {

struct PacketEngineConfig {
  /// Payload carried by a full packet.
  Bits mtu_bits = 8'000;
  Bits header_bits = 0;
  /// Egress ports, host NICs included, mark ECN when the depth found on arrival exceeds this.
  Bits ecn_threshold_bits = 520'000;
  /// Packets a flow may hold in its own host's egress queue before further sends
  /// wait for the NIC. 0 lifts the limit, so a whole window enters the queue at once.
  std::int64_t host_queue_packets = 0;
  /// DCTCP smoothing gain g.
  double dctcp_gain = 1.0 / 16.0;
  /// alpha of a freshly activated flow.
  double initial_alpha = 0.0;
  /// ECMP seed.
  std::uint64_t seed = 0;

  void validate() const;
};

struct Packet {
  FlowId flow = 0;
  std::int64_t seq = 0;
  /// Bits occupying the wire and the queue (payload + header).
  Bits size = 0;
  Bits payload = 0;
  /// Index into the flow's path of the link the packet is on.
  std::uint32_t hop = 0;
  bool ecn = false;
  /// Restoration backlog: occupies the port, never forwarded or accounted.
  bool synthetic = false;
};

/// DCTCP sender state. Window sizes are in packets.
struct TransportState {
  double cwnd = 1.0;
  /// Bandwidth-delay product of the path; also the initial window.
  double bdp = 1.0;
  /// bdp plus the ECN threshold, so a lone flow keeps its bottleneck busy.
  double max_cwnd = 1.0;
  double alpha = 1.0;
  std::int64_t inflight = 0;
  std::int64_t acked_in_window = 0;
  std::int64_t marked_in_window = 0;
  /// alpha is refreshed once an ACK for this seq (or later) arrives.
  std::int64_t window_end_seq = 0;
  /// No further cut until an ACK for this seq (or later) arrives.
  std::int64_t cut_guard_seq = 0;
};

struct FlowRuntime {
  FlowState state = FlowState::Pending;
  std::size_t unmet_deps = 0;
  double activation_s = 0.0;
  double completion_s = 0.0;
  /// L_cum: payload bits handed to the network.
  Bits sent_bits = 0;
  Bits delivered_bits = 0;
  std::int64_t next_seq = 0;
  /// Real packets of this flow waiting in or leaving its host's egress queue.
  std::int64_t host_queued = 0;
  TransportState transport;
  Path path;
  /// One-way propagation delay, used for ACK return.
  double reverse_latency_s = 0.0;
};

struct PortQueue {
  std::deque<Packet> fifo;
  /// Includes the packet being serialized.
  Bits depth = 0;
  /// Bumped to invalidate a pending transmit-complete event.
  std::uint64_t generation = 0;
};

enum class EngineEventKind : std::uint8_t { Release, TxDone, Arrive, Ack };

struct EngineEvent {
  EngineEventKind kind = EngineEventKind::Release;
  FlowId flow = 0;
  LinkId port = 0;
  std::uint64_t generation = 0;
  std::int64_t seq = 0;
  bool ecn = false;
  Packet packet;
};

struct EngineState {
  double now = 0.0;
  EventQueue<EngineEvent> events;
  std::vector<FlowRuntime> flows;
  /// Indexed by link id; every link has an egress port at its source node.
  std::vector<PortQueue> ports;
  /// Payload bits of real packets serialized onto each link.
  std::vector<Bits> link_tx_bits;
  std::vector<Bits> sample_baseline;
  std::size_t active = 0;
  std::size_t completed = 0;
  std::uint64_t events_processed = 0;
};

/// Inert copy of a whole engine state.
struct EngineSnapshot {
  EngineState state;

  double time() const { return state.now; }
  Bits sent_bits(FlowId id) const { return state.flows.at(id).sent_bits; }
  Bits port_depth(LinkId id) const { return state.ports.at(id).depth; }
};

struct StateSample {
  double time = 0.0;
  double window_s = 0.0;
  std::vector<FlowId> active;
  /// Delivered-bit rate over the window, parallel to `active`.
  std::vector<double> rate_bps;
  /// Indexed by link id.
  std::vector<Bits> port_depth;
};

/// Analytic progress applied to one flow while the packet engine is paused.
struct FlowAdvance {
  FlowId flow = 0;
  Bits bits = 0;
  /// Set for flows that finish during the flow phase.
  bool completes = false;
  double completion_s = 0.0;
};

/// Store-and-forward packet simulator with per-port FIFOs and DCTCP senders.
class PacketEngine {
 public:
  PacketEngine(const Topology& topology, const FlowSchedule& schedule, PacketEngineConfig config = {});

  double now() const { return state_.now; }
  bool done() const { return state_.completed == state_.flows.size(); }

  /// Processes every event with time <= t_stop, then sets the clock to t_stop.
  void run_until(double t_stop);
  /// Throws SimulationError if the event queue drains with flows unfinished.
  void run_to_completion();

  /// Rates since the previous sample (or activation baseline) and current depths.
  StateSample sample_state(double window_s);

  EngineSnapshot snapshot() const { return EngineSnapshot{state_}; }
  /// Resumes from `snapshot` with the listed port depths replaced.
  void restore(const EngineSnapshot& snapshot, const std::map<LinkId, Bits>& queue_overrides);
  /// Resizes port backlogs in place. A port whose override equals its depth is untouched.
  void apply_queue_overrides(const std::map<LinkId, Bits>& queue_overrides);

  /// Jumps the clock to t_end, crediting `progress` and shifting in-flight
  /// packet events by the same amount.
  void advance_flow_phase(double t_end, const std::vector<FlowAdvance>& progress);

  /// Time of the next pending event of any kind, or infinity.
  double next_event_time() const { return state_.events.next_time(); }
  /// Earliest scheduled release, or infinity.
  double next_release_time() const;
  std::vector<FlowId> active_flows() const;
  /// Active flows whose path uses `link`, by id.
  std::vector<FlowId> flows_through(LinkId link) const;

  const FlowRuntime& flow(FlowId id) const { return state_.flows.at(id); }
  Bits port_depth(LinkId id) const { return state_.ports.at(id).depth; }
  const std::vector<Bits>& link_tx_bits() const { return state_.link_tx_bits; }
  std::uint64_t events_processed() const { return state_.events_processed; }
  std::size_t active_count() const { return state_.active; }
  std::size_t completed_count() const { return state_.completed; }

  const Topology& topology() const { return *topology_; }
  const FlowSchedule& schedule() const { return *schedule_; }
  const PacketEngineConfig& config() const { return config_; }

 private:
  void handle(const EngineEvent& ev);
  void activate(FlowId id);
  void try_send(FlowId id);
  void enqueue(LinkId port, Packet packet);
  void start_service(LinkId port);
  void on_tx_done(LinkId port, std::uint64_t generation);
  void on_arrive(Packet packet);
  void on_ack(FlowId id, std::int64_t seq, bool ecn);
  void credit_delivery(FlowId id, Bits payload);
  void complete(FlowId id, double when);

  const Topology* topology_;
  const FlowSchedule* schedule_;
  PacketEngineConfig config_;
  std::vector<std::vector<FlowId>> dependents_;
  EngineState state_;
};

}  // namespace gransim
