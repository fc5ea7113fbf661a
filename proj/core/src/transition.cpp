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

#include "gransim/transition.hpp"

#include <algorithm>
#include <cmath>

namespace gransim {

Abstraction abstract_state(const EngineSnapshot& snapshot, const FlowSchedule& schedule, const Topology& topology,
                           const StateSample& last_sample) {
  Abstraction out;
  out.record.t_start = snapshot.time();
  const auto& flows = snapshot.state.flows;
  if (flows.size() != schedule.size()) throw SimulationError("abstract_state: snapshot does not match schedule");

  std::map<FlowId, double> rate;
  for (std::size_t i = 0; i < last_sample.active.size(); ++i) rate[last_sample.active[i]] = last_sample.rate_bps[i];

  for (FlowId id = 0; id < flows.size(); ++id) {
    const FlowRuntime& f = flows[id];
    if (f.state != FlowState::Active) continue;
    const Flow& spec = schedule.flows[id];
    AbstractedFlow a;
    a.id = id;
    a.l_cum = f.sent_bits;
    a.remaining_bits = spec.size_bits - f.sent_bits;
    auto r = rate.find(id);
    a.b_inst_bps = r == rate.end() ? 0.0 : r->second;
    if (a.remaining_bits <= 0) {
      out.record.excluded.push_back(id);
      continue;
    }
    SteadyFlowView v;
    v.id = id;
    v.remaining_bits = a.remaining_bits;
    v.b_inst_bps = a.b_inst_bps;
    v.b_min_bps = spec.min_bandwidth_bps;
    v.weight = spec.weight;
    v.path = f.path;
    out.views.push_back(std::move(v));
    out.record.flows.push_back(a);
  }
  for (LinkId l = 0; l < snapshot.state.ports.size(); ++l) {
    if (topology.is_switch_port(l)) out.record.port_depths[l] = snapshot.state.ports[l].depth;
  }
  return out;
}

double compensation_delay(const Path& path, const std::map<LinkId, Bits>& port_depths, const Topology& topology) {
  double delay = 0.0;
  for (LinkId l : path.links) {
    if (!topology.is_switch_port(l)) continue;
    auto it = port_depths.find(l);
    if (it == port_depths.end()) continue;
    delay += static_cast<double>(it->second) / topology.link(l).capacity_bps;
  }
  return delay;
}

void compensate_fct(AbstractionRecord& record, const std::vector<SteadyFlowView>& views,
                    const SteadyPhasePlan& plan, const Topology& topology) {
  if (views.size() != record.flows.size() || plan.tau.size() != record.flows.size()) {
    throw SimulationError("compensate_fct: record, views and plan disagree");
  }
  for (std::size_t i = 0; i < record.flows.size(); ++i) {
    AbstractedFlow& a = record.flows[i];
    a.tau = plan.tau[i];
    a.delta_tau = compensation_delay(views[i].path, record.port_depths, topology);
    a.tau_hat = a.tau + a.delta_tau;
  }
}

double finisher_completion_time(const AbstractionRecord& record, const AbstractedFlow& flow, const Path& path,
                                const Topology& topology, Bits packet_bits) {
  return record.t_start + flow.tau_hat + path_base_latency(topology, path, packet_bits);
}

RestorationResult restore_state(double t_start, double t_end, const std::map<LinkId, std::vector<double>>& traces,
                                const std::map<LinkId, Bits>& current_depths, const QueuePredictor& predictor) {
  RestorationResult out;
  if (t_end <= t_start) {
    out.overrides = current_depths;
    return out;
  }
  for (const auto& [port, depth] : current_depths) {
    auto it = traces.find(port);
    if (it == traces.end() || it->second.empty()) {
      out.overrides[port] = depth;
      ++out.fallbacks;
      continue;
    }
    const auto& trace = it->second;
    const double seen = *std::max_element(trace.begin(), trace.end());
    const double predicted = predictor.predict(trace);
    const double clamped = std::clamp(predicted, 0.0, 2.0 * std::max(seen, 0.0));
    if (clamped != predicted) ++out.clamped;
    out.overrides[port] = static_cast<Bits>(std::llround(clamped));
  }
  return out;
}

}  // namespace gransim
