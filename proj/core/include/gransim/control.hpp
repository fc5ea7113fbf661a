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

#include <deque>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gransim/core_model.hpp"
#include "gransim/flow_engine.hpp"

namespace gransim {

struct ControlConfig {
  /// Bandwidth variation threshold. Zero disables switching.
  double eps_bw_bps = 0.02 * 200e9;
  /// 16 KB.
  double eps_q_bits = 128'000.0;
  std::size_t window_len = 10;
  double sample_interval_s = 50e-6;
  std::size_t n_stable = 3;
  double min_steady_s = 500e-6;
  double max_steady_s = 100e-3;

  /// Defaults with eps_bw at 2% of the given link capacity.
  static ControlConfig defaults_for(double link_capacity_bps);
  void validate() const;
};

struct VariationCheck {
  bool stable = false;
  /// max - min over the window; 0 when fewer than two samples.
  double variation = 0.0;
};

/// Stable iff at least two samples and max - min < eps.
VariationCheck check_bandwidth_stability(std::span<const double> samples, double eps_bw_bps);
VariationCheck check_queue_stability(std::span<const double> samples, double eps_q_bits);

/// Sliding windows and the consecutive-stable-round counter.
class StabilityMonitor {
 public:
  explicit StabilityMonitor(ControlConfig config);

  /// Pushes one round of samples and evaluates it. Flows absent from
  /// `active` lose their window. Returns the flag: true once n_stable
  /// consecutive rounds were stable.
  bool observe(const std::vector<FlowId>& active, const std::vector<double>& rates_bps,
               const std::map<LinkId, double>& port_depths);

  /// Stable-round counter back to zero; windows are kept.
  void reset_counter() { stable_rounds_ = 0; }

  bool flag() const { return stable_rounds_ >= config_.n_stable; }
  std::size_t stable_rounds() const { return stable_rounds_; }
  /// Result of the most recent round.
  bool last_round_stable() const { return last_round_stable_; }
  const ControlConfig& config() const { return config_; }
  const std::deque<double>& flow_window(FlowId id) const { return flow_windows_.at(id); }
  const std::deque<double>& port_window(LinkId id) const { return port_windows_.at(id); }

 private:
  ControlConfig config_;
  std::map<FlowId, std::deque<double>> flow_windows_;
  std::map<LinkId, std::deque<double>> port_windows_;
  std::size_t stable_rounds_ = 0;
  bool last_round_stable_ = false;
};

enum class PhaseEndReason : std::uint8_t { FlowFinish, NewArrival, Cap };

std::string to_string(PhaseEndReason r);

struct FlowPhaseDecision {
  bool veto = false;
  double t_end = 0.0;
  PhaseEndReason reason = PhaseEndReason::FlowFinish;
};

/// T_end = min(T_start + tau_steady, next release, T_start + max_steady).
/// Vetoed when the result is shorter than min_steady.
FlowPhaseDecision schedule_flow_to_packet(const SteadyPhasePlan& plan, double next_release_s,
                                          const ControlConfig& config);

}  // namespace gransim
