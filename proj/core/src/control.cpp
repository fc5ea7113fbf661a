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

#include "gransim/control.hpp"

#include <algorithm>
#include <cmath>

namespace gransim {

ControlConfig ControlConfig::defaults_for(double link_capacity_bps) {
  ControlConfig c;
  c.eps_bw_bps = 0.02 * link_capacity_bps;
  return c;
}

void ControlConfig::validate() const {
  if (!(eps_bw_bps >= 0.0)) throw ConfigError("control.eps_bw_bps must be >= 0");
  if (!(eps_q_bits > 0.0)) throw ConfigError("control.eps_q_bytes must be > 0");
  if (window_len < 2) throw ConfigError("control.window_len must be >= 2");
  if (!(sample_interval_s > 0.0)) throw ConfigError("control.sample_interval_s must be > 0");
  if (n_stable < 1) throw ConfigError("control.n_stable must be >= 1");
  if (!(min_steady_s > 0.0) || !(min_steady_s <= max_steady_s)) {
    throw ConfigError("control: need 0 < min_steady_s <= max_steady_s");
  }
}

namespace {

VariationCheck check_variation(std::span<const double> samples, double eps) {
  VariationCheck r;
  if (samples.size() < 2) return r;
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  r.variation = *hi - *lo;
  r.stable = r.variation < eps;
  return r;
}

bool window_stable(const std::deque<double>& w, double eps) {
  if (w.size() < 2) return false;
  const auto [lo, hi] = std::minmax_element(w.begin(), w.end());
  return *hi - *lo < eps;
}

void push_bounded(std::deque<double>& w, double v, std::size_t cap) {
  w.push_back(v);
  while (w.size() > cap) w.pop_front();
}

}  // namespace

VariationCheck check_bandwidth_stability(std::span<const double> samples, double eps_bw_bps) {
  return check_variation(samples, eps_bw_bps);
}

VariationCheck check_queue_stability(std::span<const double> samples, double eps_q_bits) {
  return check_variation(samples, eps_q_bits);
}

StabilityMonitor::StabilityMonitor(ControlConfig config) : config_(config) { config_.validate(); }

bool StabilityMonitor::observe(const std::vector<FlowId>& active, const std::vector<double>& rates_bps,
                               const std::map<LinkId, double>& port_depths) {
  if (active.size() != rates_bps.size()) throw ConfigError("observe: rates do not match active flows");

  std::map<FlowId, std::deque<double>> kept;
  for (std::size_t i = 0; i < active.size(); ++i) {
    auto it = flow_windows_.find(active[i]);
    std::deque<double> w = it == flow_windows_.end() ? std::deque<double>{} : std::move(it->second);
    push_bounded(w, rates_bps[i], config_.window_len);
    kept.emplace(active[i], std::move(w));
  }
  flow_windows_ = std::move(kept);
  for (const auto& [port, depth] : port_depths) push_bounded(port_windows_[port], depth, config_.window_len);

  bool stable = !active.empty();
  for (const auto& [id, w] : flow_windows_) {
    if (!window_stable(w, config_.eps_bw_bps)) {
      stable = false;
      break;
    }
  }
  if (stable) {
    for (const auto& [port, w] : port_windows_) {
      if (!window_stable(w, config_.eps_q_bits)) {
        stable = false;
        break;
      }
    }
  }
  last_round_stable_ = stable;
  stable_rounds_ = stable ? stable_rounds_ + 1 : 0;
  return flag();
}

std::string to_string(PhaseEndReason r) {
  switch (r) {
    case PhaseEndReason::FlowFinish: return "flow_finish";
    case PhaseEndReason::NewArrival: return "new_arrival";
    case PhaseEndReason::Cap: return "cap";
  }
  return "unknown";
}

FlowPhaseDecision schedule_flow_to_packet(const SteadyPhasePlan& plan, double next_release_s,
                                          const ControlConfig& config) {
  FlowPhaseDecision d;
  d.t_end = plan.t_start + plan.tau_steady;
  d.reason = PhaseEndReason::FlowFinish;
  if (next_release_s < d.t_end) {
    d.t_end = next_release_s;
    d.reason = PhaseEndReason::NewArrival;
  }
  const double cap = plan.t_start + config.max_steady_s;
  if (cap < d.t_end) {
    d.t_end = cap;
    d.reason = PhaseEndReason::Cap;
  }
  d.veto = d.t_end - plan.t_start < config.min_steady_s;
  return d;
}

}  // namespace gransim
