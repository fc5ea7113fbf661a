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

#include <vector>

#include "gransim/core_model.hpp"

namespace gransim {

/// Raised when the initial rates already oversubscribe a link.
class InfeasibleAllocation : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

struct SteadyFlowView {
  FlowId id = 0;
  /// L_j, bits still to be handed to the network.
  Bits remaining_bits = 0;
  double b_inst_bps = 0.0;
  double b_min_bps = kInfinity;
  double weight = 1.0;
  double b_init_bps = 0.0;
  double b_re_bps = 0.0;
  Path path;
};

/// min(B_inst, B_min).
inline double initial_bandwidth(double b_inst_bps, double b_min_bps) { return std::min(b_inst_bps, b_min_bps); }

/// Weighted progressive filling seeded with each flow's b_init_bps.
///
/// Every round raises all unfrozen flows by weight * x, where x is the
/// smallest per-link ratio residual / (sum of unfrozen weights), then freezes
/// the flows crossing the links that ran out. On a single link this is one
/// round of B_init + (C - sum B_init) * W / sum W. Zero-weight flows keep
/// their initial rate.
///
/// Throws InfeasibleAllocation when sum B_init on a link exceeds
/// capacity * (1 + slack). Overloads inside the slack are scaled down
/// proportionally first.
void reallocate_bandwidth(std::vector<SteadyFlowView>& flows, const Topology& topology, double slack = 0.0);

struct SteadyPhasePlan {
  double t_start = 0.0;
  double tau_steady = 0.0;
  double t_end = 0.0;
  /// Parallel to the flow vector passed in.
  std::vector<double> tau;
  /// Ids of flows whose tau is within 1e-12 (relative) of tau_steady.
  std::vector<FlowId> earliest;
};

/// tau_j = L_j / B_Re; the phase lasts until the first flow drains.
SteadyPhasePlan estimate_steady_duration(const std::vector<SteadyFlowView>& flows, double t_start);

struct FlowProgress {
  FlowId id = 0;
  Bits bits = 0;
  bool completes = false;
};

/// Bits moved by every flow over `duration` at its B_Re. A flow completes
/// when that reaches its remainder, which holds for the earliest finishers
/// whenever duration covers tau_steady.
std::vector<FlowProgress> fast_forward(const std::vector<SteadyFlowView>& flows, const SteadyPhasePlan& plan,
                                       double duration);

/// Cumulative per-link carried bits, sampled at increasing times.
struct LinkCounterTrace {
  std::vector<double> times;
  std::vector<std::vector<double>> bits;

  void record(double t, std::vector<double> per_link) {
    times.push_back(t);
    bits.push_back(std::move(per_link));
  }
};

struct FluidFlowResult {
  double activation_s = 0.0;
  double completion_s = 0.0;
};

struct FluidRunResult {
  std::vector<FluidFlowResult> flows;
  LinkCounterTrace link_trace;
  std::size_t reallocations = 0;
};

/// Event-driven fluid simulation: weighted max-min rates (from zero) are
/// recomputed at every activation and completion. No latency or queueing.
FluidRunResult run_fluid(const Topology& topology, const FlowSchedule& schedule, std::uint64_t seed);

}  // namespace gransim
