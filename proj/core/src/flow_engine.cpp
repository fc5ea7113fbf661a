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

#include "gransim/flow_engine.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace gransim {

namespace {

struct LinkUsage {
  LinkId link;
  double capacity;
  std::vector<std::size_t> members;
};

std::vector<LinkUsage> collect_links(const std::vector<SteadyFlowView>& flows, const Topology& topology) {
  std::map<LinkId, std::vector<std::size_t>> by_link;
  for (std::size_t i = 0; i < flows.size(); ++i) {
    for (LinkId l : flows[i].path.links) by_link[l].push_back(i);
  }
  std::vector<LinkUsage> out;
  out.reserve(by_link.size());
  for (auto& [l, members] : by_link) out.push_back(LinkUsage{l, topology.link(l).capacity_bps, std::move(members)});
  return out;
}

}  // namespace

void reallocate_bandwidth(std::vector<SteadyFlowView>& flows, const Topology& topology, double slack) {
  if (slack < 0.0) throw ConfigError("allocation slack must be >= 0");
  for (auto& f : flows) {
    if (!(f.b_inst_bps >= 0.0) || !(f.weight >= 0.0)) {
      throw ConfigError("flow " + std::to_string(f.id) + ": bandwidth and weight must be >= 0");
    }
    if (f.path.links.empty()) throw ConfigError("flow " + std::to_string(f.id) + ": empty path");
    f.b_init_bps = initial_bandwidth(f.b_inst_bps, f.b_min_bps);
  }

  const auto links = collect_links(flows, topology);
  for (const auto& l : links) {
    double sum = 0.0;
    for (std::size_t i : l.members) sum += flows[i].b_init_bps;
    if (sum > l.capacity * (1.0 + slack)) {
      throw InfeasibleAllocation("initial rates on link " + std::to_string(l.link) + " exceed its capacity");
    }
  }
  // Overloads within the slack: scale down until every link fits.
  for (std::size_t pass = 0; pass <= links.size(); ++pass) {
    bool changed = false;
    for (const auto& l : links) {
      double sum = 0.0;
      for (std::size_t i : l.members) sum += flows[i].b_init_bps;
      if (sum > l.capacity) {
        const double factor = l.capacity / sum;
        for (std::size_t i : l.members) flows[i].b_init_bps *= factor;
        changed = true;
      }
    }
    if (!changed) break;
  }

  std::vector<double> rate(flows.size());
  std::vector<bool> frozen(flows.size());
  for (std::size_t i = 0; i < flows.size(); ++i) {
    rate[i] = flows[i].b_init_bps;
    frozen[i] = flows[i].weight == 0.0;
  }

  while (true) {
    double best = kInfinity;
    std::vector<double> ratio(links.size(), kInfinity);
    for (std::size_t k = 0; k < links.size(); ++k) {
      double used = 0.0;
      double weight = 0.0;
      for (std::size_t i : links[k].members) {
        used += rate[i];
        if (!frozen[i]) weight += flows[i].weight;
      }
      if (weight == 0.0) continue;
      ratio[k] = std::max(0.0, links[k].capacity - used) / weight;
      best = std::min(best, ratio[k]);
    }
    if (best == kInfinity) break;

    for (std::size_t i = 0; i < flows.size(); ++i) {
      if (!frozen[i]) rate[i] += flows[i].weight * best;
    }
    for (std::size_t k = 0; k < links.size(); ++k) {
      if (ratio[k] <= best * (1.0 + 1e-12)) {
        for (std::size_t i : links[k].members) frozen[i] = true;
      }
    }
  }
  for (std::size_t i = 0; i < flows.size(); ++i) flows[i].b_re_bps = rate[i];
}

SteadyPhasePlan estimate_steady_duration(const std::vector<SteadyFlowView>& flows, double t_start) {
  if (flows.empty()) throw ConfigError("estimate_steady_duration: no steady flows");
  SteadyPhasePlan plan;
  plan.t_start = t_start;
  plan.tau.reserve(flows.size());
  plan.tau_steady = kInfinity;
  for (const auto& f : flows) {
    if (!(f.b_re_bps > 0.0)) {
      throw SimulationError("estimate_steady_duration: flow " + std::to_string(f.id) + " has no bandwidth");
    }
    const double tau = static_cast<double>(f.remaining_bits) / f.b_re_bps;
    plan.tau.push_back(tau);
    plan.tau_steady = std::min(plan.tau_steady, tau);
  }
  for (std::size_t i = 0; i < flows.size(); ++i) {
    if (plan.tau[i] <= plan.tau_steady * (1.0 + 1e-12)) plan.earliest.push_back(flows[i].id);
  }
  plan.t_end = t_start + plan.tau_steady;
  return plan;
}

std::vector<FlowProgress> fast_forward(const std::vector<SteadyFlowView>& flows, const SteadyPhasePlan& plan,
                                       double duration) {
  if (flows.size() != plan.tau.size()) throw ConfigError("fast_forward: plan does not match the flow set");
  if (duration < 0.0) throw ConfigError("fast_forward: negative duration");
  const bool full = duration >= plan.tau_steady;
  std::vector<FlowProgress> out;
  out.reserve(flows.size());
  for (const auto& f : flows) {
    FlowProgress p;
    p.id = f.id;
    const bool earliest = std::find(plan.earliest.begin(), plan.earliest.end(), f.id) != plan.earliest.end();
    if (full && earliest) {
      p.bits = f.remaining_bits;
    } else {
      p.bits = std::min(f.remaining_bits, static_cast<Bits>(std::llround(f.b_re_bps * duration)));
    }
    p.completes = p.bits == f.remaining_bits;
    out.push_back(p);
  }
  return out;
}

FluidRunResult run_fluid(const Topology& topology, const FlowSchedule& schedule, std::uint64_t seed) {
  validate_schedule(schedule, topology.host_count());
  const std::size_t n = schedule.size();
  FluidRunResult result;
  result.flows.resize(n);

  std::vector<Path> paths(n);
  std::vector<std::vector<FlowId>> dependents(n);
  std::vector<std::size_t> unmet(n);
  for (const Flow& f : schedule.flows) {
    paths[f.id] = route(topology, f.src, f.dst, f.id, seed);
    unmet[f.id] = f.deps.size();
    for (FlowId d : f.deps) dependents[d].push_back(f.id);
  }

  EventQueue<FlowId> releases;
  for (const Flow& f : schedule.flows) {
    if (f.deps.empty()) releases.push(f.release_s, f.id);
  }

  const std::size_t n_links = topology.links().size();
  std::vector<double> carried(n_links, 0.0);
  std::vector<double> remaining(n);
  std::vector<FlowId> active;
  std::vector<SteadyFlowView> views;
  double now = 0.0;
  std::size_t completed = 0;
  if (!releases.empty()) now = releases.next_time();
  result.link_trace.record(now, carried);

  auto release_due = [&]() {
    while (!releases.empty() && releases.next_time() <= now) {
      const FlowId id = releases.pop().payload;
      result.flows[id].activation_s = now;
      remaining[id] = static_cast<double>(schedule.flows[id].size_bits);
      active.push_back(id);
    }
  };

  while (completed < n) {
    release_due();
    if (active.empty()) {
      if (releases.empty()) throw SimulationError("fluid run stalled with unfinished flows");
      now = releases.next_time();
      continue;
    }
    std::sort(active.begin(), active.end());
    views.clear();
    for (FlowId id : active) {
      SteadyFlowView v;
      v.id = id;
      v.weight = schedule.flows[id].weight;
      v.path = paths[id];
      views.push_back(std::move(v));
    }
    reallocate_bandwidth(views, topology);
    ++result.reallocations;

    double dt = releases.empty() ? kInfinity : releases.next_time() - now;
    for (const auto& v : views) {
      if (!(v.b_re_bps > 0.0)) {
        throw SimulationError("fluid run: flow " + std::to_string(v.id) + " gets no bandwidth");
      }
      dt = std::min(dt, remaining[v.id] / v.b_re_bps);
    }
    now += dt;

    std::vector<FlowId> still;
    std::vector<FlowId> finished;
    for (const auto& v : views) {
      const double moved = std::min(remaining[v.id], v.b_re_bps * dt);
      for (LinkId l : v.path.links) carried[l] += moved;
      remaining[v.id] -= moved;
      const double size = static_cast<double>(schedule.flows[v.id].size_bits);
      if (remaining[v.id] <= size * 1e-12) {
        // Credit any rounding residue so the counters carry exactly the flow size.
        for (LinkId l : v.path.links) carried[l] += remaining[v.id];
        remaining[v.id] = 0.0;
        finished.push_back(v.id);
      } else {
        still.push_back(v.id);
      }
    }
    active = std::move(still);
    for (FlowId id : finished) {
      result.flows[id].completion_s = now;
      ++completed;
      for (FlowId c : dependents[id]) {
        if (--unmet[c] == 0) releases.push(std::max(schedule.flows[c].release_s, now), c);
      }
    }
    result.link_trace.record(now, carried);
  }
  return result;
}

}  // namespace gransim
