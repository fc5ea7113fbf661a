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
#include <vector>

#include "gransim/flow_engine.hpp"
#include "gransim/packet_engine.hpp"
#include "gransim/predictor.hpp"

namespace gransim {

struct AbstractedFlow {
  FlowId id = 0;
  double b_inst_bps = 0.0;
  Bits l_cum = 0;
  /// L_init - L_cum.
  Bits remaining_bits = 0;
  double tau = 0.0;
  double delta_tau = 0.0;
  /// tau + delta_tau.
  double tau_hat = 0.0;
};

struct AbstractionRecord {
  double t_start = 0.0;
  std::vector<AbstractedFlow> flows;
  /// Switch egress depths at t_start.
  std::map<LinkId, Bits> port_depths;
  /// Active flows with nothing left to send; they stay in the packet engine.
  std::vector<FlowId> excluded;
};

struct Abstraction {
  std::vector<SteadyFlowView> views;
  AbstractionRecord record;
};

/// Collapses the active flows of `snapshot` into steady-flow views. Rates
/// come from `last_sample`; flows missing from it get rate 0.
Abstraction abstract_state(const EngineSnapshot& snapshot, const FlowSchedule& schedule, const Topology& topology,
                           const StateSample& last_sample);

/// Sum of Q_h / C_h over the switch egress hops of `path`.
double compensation_delay(const Path& path, const std::map<LinkId, Bits>& port_depths, const Topology& topology);

/// Fills tau, delta_tau and tau_hat of every record entry. `views` and
/// `plan.tau` must be parallel to record.flows.
void compensate_fct(AbstractionRecord& record, const std::vector<SteadyFlowView>& views,
                    const SteadyPhasePlan& plan, const Topology& topology);

/// Completion time of a flow that drains during the flow phase: the last
/// bit leaves at t_start + tau_hat and still needs the path's base latency.
double finisher_completion_time(const AbstractionRecord& record, const AbstractedFlow& flow, const Path& path,
                                const Topology& topology, Bits packet_bits);

struct RestorationResult {
  std::map<LinkId, Bits> overrides;
  std::size_t clamped = 0;
  std::size_t fallbacks = 0;
};

/// Predicted depth for every switch port at t_end, clamped to
/// [0, 2 * max depth seen in the trace]. A zero-length horizon returns the
/// current depths unchanged. Ports without a trace fall back to their
/// current depth and are counted.
RestorationResult restore_state(double t_start, double t_end, const std::map<LinkId, std::vector<double>>& traces,
                                const std::map<LinkId, Bits>& current_depths, const QueuePredictor& predictor);

}  // namespace gransim
