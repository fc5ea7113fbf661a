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

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "gransim/control.hpp"
#include "gransim/metrics.hpp"
#include "gransim/packet_engine.hpp"
#include "gransim/predictor.hpp"

namespace gransim {

enum class RestorationMode : std::uint8_t {
  /// Resume with the queues left at the switch point.
  None,
  Persistence,
  Attention,
};

std::string to_string(RestorationMode mode);
RestorationMode restoration_mode_from_string(const std::string& s);

struct HybridOptions {
  ControlConfig control;
  PacketEngineConfig engine;
  RestorationMode restoration = RestorationMode::Persistence;
  /// Required for RestorationMode::Attention.
  std::shared_ptr<const QueuePredictor> predictor;
  /// Tolerated relative overload of measured rates at a switch point.
  double allocation_slack = 0.01;
  /// Keep every switch-port depth sample for export.
  bool record_queue_traces = false;
};

struct PhaseRecord {
  double t_begin = 0.0;
  double t_end = 0.0;
  /// "packet" or "flow".
  std::string mode;
  /// Why the phase ended.
  std::string reason;
};

struct TransitionRecord {
  double t = 0.0;
  /// packet_to_flow, flow_to_packet, aborted or vetoed.
  std::string direction;
  std::size_t flows = 0;
  double tau_steady = 0.0;
  double sum_delta_tau = 0.0;
  std::map<LinkId, Bits> predicted_depths;
  std::size_t clamped = 0;
  std::string note;
};

struct QueueSample {
  LinkId port = 0;
  double t = 0.0;
  Bits depth_bits = 0;
};

struct RunResult {
  std::vector<FlowRecord> records;
  RunSummary summary;
  std::vector<PhaseRecord> phases;
  std::vector<TransitionRecord> transitions;
  LinkCounterTrace link_trace;
  std::vector<QueueSample> queue_trace;
};

/// PLS: packet engine end to end. FLS: fluid max-min model end to end.
RunResult run_pure(const Topology& topology, const FlowSchedule& schedule, SimMode mode,
                   const HybridOptions& options);

/// Packet simulation that hands steady stretches to the flow model and
/// resumes packet simulation with restored queues.
RunResult run_hybrid(const Topology& topology, const FlowSchedule& schedule, const HybridOptions& options);

RunResult run_mode(const Topology& topology, const FlowSchedule& schedule, SimMode mode, const HybridOptions& options);

}  // namespace gransim
