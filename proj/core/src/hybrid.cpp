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

#include "gransim/hybrid.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include "gransim/flow_engine.hpp"
#include "gransim/transition.hpp"

namespace gransim {

std::string to_string(RestorationMode mode) {
  switch (mode) {
    case RestorationMode::None: return "none";
    case RestorationMode::Persistence: return "persistence";
    case RestorationMode::Attention: return "attention";
  }
  return "unknown";
}

RestorationMode restoration_mode_from_string(const std::string& s) {
  if (s == "none") return RestorationMode::None;
  if (s == "persistence") return RestorationMode::Persistence;
  if (s == "attention") return RestorationMode::Attention;
  throw ConfigError("unknown restoration mode '" + s + "' (expected none|persistence|attention)");
}

namespace {

using Clock = std::chrono::steady_clock;

double min_release(const FlowSchedule& schedule) {
  double t = kInfinity;
  for (const auto& f : schedule.flows) t = std::min(t, f.release_s);
  return schedule.empty() ? 0.0 : t;
}

void finish_summary(RunResult& r, const FlowSchedule& schedule, const Topology& topology, SimMode mode,
                    std::uint64_t seed) {
  RunSummary& s = r.summary;
  s.mode = mode;
  s.seed = seed;
  s.flows = schedule.size();
  s.jct_s = jct(r.records);
  double flow_time = 0.0;
  for (const auto& p : r.phases) {
    if (p.mode == "flow") {
      flow_time += p.t_end - p.t_begin;
      ++s.flow_phases;
    }
  }
  s.flow_fraction = s.jct_s > 0.0 ? std::clamp(flow_time / s.jct_s, 0.0, 1.0) : 0.0;
  s.link_mean_throughput_bps.assign(topology.links().size(), 0.0);
  if (!r.link_trace.bits.empty() && s.jct_s > 0.0) {
    const auto& last = r.link_trace.bits.back();
    for (std::size_t l = 0; l < last.size(); ++l) s.link_mean_throughput_bps[l] = last[l] / s.jct_s;
  }
}

bool has_draining_flow(const PacketEngine& engine, const FlowSchedule& schedule, const std::vector<FlowId>& active) {
  return std::any_of(active.begin(), active.end(), [&](FlowId id) {
    return engine.flow(id).sent_bits >= schedule.flows[id].size_bits;
  });
}

std::vector<double> as_doubles(const std::vector<Bits>& v) { return {v.begin(), v.end()}; }

RunResult run_packet_loop(const Topology& topology, const FlowSchedule& schedule, const HybridOptions& options,
                          bool hybrid) {
  options.control.validate();
  RunResult res;
  const SimMode mode = hybrid ? SimMode::HYBRID : SimMode::PLS;
  if (schedule.empty()) {
    finish_summary(res, schedule, topology, mode, options.engine.seed);
    return res;
  }

  const QueuePredictor* predictor = nullptr;
  PersistencePredictor persistence(options.control.window_len);
  if (options.restoration == RestorationMode::Persistence) predictor = &persistence;
  if (options.restoration == RestorationMode::Attention) {
    if (!options.predictor) throw ConfigError("attention restoration needs a weight file");
    predictor = options.predictor.get();
  }
  std::size_t keep = std::max<std::size_t>(256, options.control.window_len);
  if (const auto* a = dynamic_cast<const AttentionPredictor*>(predictor)) {
    keep = std::max(keep, a->weights().seq_len_max);
  }

  std::vector<LinkId> switch_ports;
  for (LinkId l = 0; l < topology.links().size(); ++l) {
    if (topology.is_switch_port(l)) switch_ports.push_back(l);
  }

  const auto wall_start = Clock::now();
  PacketEngine engine(topology, schedule, options.engine);
  StabilityMonitor monitor(options.control);
  std::map<LinkId, std::vector<double>> traces;
  std::vector<bool> finished_in_flow(schedule.size(), false);
  const double si = options.control.sample_interval_s;
  const Bits packet_bits = options.engine.mtu_bits + options.engine.header_bits;

  const double t0 = min_release(schedule);
  engine.run_until(t0);
  res.link_trace.record(t0, as_doubles(engine.link_tx_bits()));
  double phase_begin = t0;

  while (!engine.done()) {
    if (engine.active_count() == 0) {
      const double next = engine.next_event_time();
      if (next == kInfinity) throw SimulationError("packet engine stalled with unfinished flows");
      if (next > engine.now() + si) {
        engine.run_until(next);
        continue;
      }
    }
    engine.run_until(engine.now() + si);
    const StateSample sample = engine.sample_state(si);
    res.link_trace.record(sample.time, as_doubles(engine.link_tx_bits()));

    std::map<LinkId, double> depths;
    for (LinkId p : switch_ports) {
      const auto d = sample.port_depth[p];
      depths[p] = static_cast<double>(d);
      auto& tr = traces[p];
      tr.push_back(static_cast<double>(d));
      if (tr.size() > keep) tr.erase(tr.begin(), tr.begin() + static_cast<std::ptrdiff_t>(tr.size() - keep));
      if (options.record_queue_traces) res.queue_trace.push_back(QueueSample{p, sample.time, d});
    }
    if (!hybrid || engine.done()) continue;
    if (!monitor.observe(sample.active, sample.rate_bps, depths)) continue;
    // A flow with every bit sent but some still in flight would be frozen for the whole
    // phase, so the switch waits until such tails drain.
    if (has_draining_flow(engine, schedule, sample.active)) continue;
    monitor.reset_counter();

    // Packet -> flow.
    const double t_start = engine.now();
    const EngineSnapshot snap = engine.snapshot();
    // B_inst is read over the whole stability window rather than the last interval.
    StateSample smoothed = sample;
    for (std::size_t i = 0; i < smoothed.active.size(); ++i) {
      const auto& w = monitor.flow_window(smoothed.active[i]);
      smoothed.rate_bps[i] = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
    }
    Abstraction abs = abstract_state(snap, schedule, topology, smoothed);
    TransitionRecord tr;
    tr.t = t_start;
    tr.flows = abs.views.size();
    if (abs.views.empty()) {
      tr.direction = "aborted";
      tr.note = "no active flow has bits left to send";
      res.transitions.push_back(tr);
      continue;
    }
    SteadyPhasePlan plan;
    try {
      reallocate_bandwidth(abs.views, topology, options.allocation_slack);
      plan = estimate_steady_duration(abs.views, t_start);
    } catch (const SimulationError& e) {
      tr.direction = "aborted";
      tr.note = e.what();
      res.transitions.push_back(tr);
      continue;
    }
    const FlowPhaseDecision decision = schedule_flow_to_packet(plan, engine.next_release_time(), options.control);
    tr.tau_steady = plan.tau_steady;
    if (decision.veto) {
      tr.direction = "vetoed";
      tr.note = "phase of " + std::to_string(decision.t_end - t_start) + " s is below min_steady_s";
      res.transitions.push_back(tr);
      continue;
    }

    compensate_fct(abs.record, abs.views, plan, topology);
    const double t_end = decision.t_end;
    const auto progress = fast_forward(abs.views, plan, t_end - t_start);
    std::vector<FlowAdvance> advances;
    advances.reserve(progress.size());
    for (std::size_t i = 0; i < progress.size(); ++i) {
      FlowAdvance a;
      a.flow = progress[i].id;
      a.bits = progress[i].bits;
      a.completes = progress[i].completes;
      if (a.completes) {
        a.completion_s =
            finisher_completion_time(abs.record, abs.record.flows[i], abs.views[i].path, topology, packet_bits);
        finished_in_flow[a.flow] = true;
      }
      advances.push_back(a);
      tr.sum_delta_tau += abs.record.flows[i].delta_tau;
    }
    tr.direction = "packet_to_flow";
    res.transitions.push_back(tr);

    // Flow -> packet.
    RestorationResult restored;
    if (predictor) restored = restore_state(t_start, t_end, traces, abs.record.port_depths, *predictor);
    engine.advance_flow_phase(t_end, advances);
    engine.apply_queue_overrides(restored.overrides);

    res.phases.push_back(PhaseRecord{phase_begin, t_start, "packet", "steady"});
    res.phases.push_back(PhaseRecord{t_start, t_end, "flow", to_string(decision.reason)});
    phase_begin = t_end;
    res.link_trace.record(t_end, as_doubles(engine.link_tx_bits()));

    TransitionRecord back;
    back.t = t_end;
    back.direction = "flow_to_packet";
    back.flows = abs.views.size();
    back.tau_steady = plan.tau_steady;
    back.predicted_depths = std::move(restored.overrides);
    back.clamped = restored.clamped;
    back.note = predictor ? predictor->name() : "none";
    res.transitions.push_back(std::move(back));
  }
  const double wall = std::chrono::duration<double>(Clock::now() - wall_start).count();

  res.records.reserve(schedule.size());
  double last = t0;
  Bits delivered = 0;
  for (const Flow& f : schedule.flows) {
    const FlowRuntime& rt = engine.flow(f.id);
    FlowRecord r;
    r.id = f.id;
    r.src = f.src;
    r.dst = f.dst;
    r.size_bits = f.size_bits;
    r.release_s = f.release_s;
    r.start_s = rt.activation_s;
    r.completion_s = rt.completion_s;
    r.mode = finished_in_flow[f.id] ? SimMode::FLS : SimMode::PLS;
    res.records.push_back(r);
    last = std::max(last, rt.completion_s);
    delivered += rt.delivered_bits;
  }
  if (last > phase_begin) res.phases.push_back(PhaseRecord{phase_begin, last, "packet", "drained"});
  res.link_trace.record(engine.now(), as_doubles(engine.link_tx_bits()));

  finish_summary(res, schedule, topology, mode, options.engine.seed);
  res.summary.wall_clock_s = wall;
  res.summary.events = engine.events_processed();
  res.summary.delivered_bits = delivered;
  return res;
}

RunResult run_fls(const Topology& topology, const FlowSchedule& schedule, const HybridOptions& options) {
  RunResult res;
  const auto wall_start = Clock::now();
  FluidRunResult fluid = run_fluid(topology, schedule, options.engine.seed);
  const double wall = std::chrono::duration<double>(Clock::now() - wall_start).count();

  double last = min_release(schedule);
  for (const Flow& f : schedule.flows) {
    FlowRecord r;
    r.id = f.id;
    r.src = f.src;
    r.dst = f.dst;
    r.size_bits = f.size_bits;
    r.release_s = f.release_s;
    r.start_s = fluid.flows[f.id].activation_s;
    r.completion_s = fluid.flows[f.id].completion_s;
    r.mode = SimMode::FLS;
    res.records.push_back(r);
    last = std::max(last, r.completion_s);
  }
  if (!schedule.empty()) res.phases.push_back(PhaseRecord{min_release(schedule), last, "flow", "drained"});
  res.link_trace = std::move(fluid.link_trace);
  finish_summary(res, schedule, topology, SimMode::FLS, options.engine.seed);
  res.summary.wall_clock_s = wall;
  res.summary.events = fluid.reallocations;
  res.summary.delivered_bits = schedule.total_bits();
  return res;
}

}  // namespace

RunResult run_pure(const Topology& topology, const FlowSchedule& schedule, SimMode mode,
                   const HybridOptions& options) {
  switch (mode) {
    case SimMode::PLS: return run_packet_loop(topology, schedule, options, false);
    case SimMode::FLS: return run_fls(topology, schedule, options);
    case SimMode::HYBRID: break;
  }
  throw ConfigError("run_pure accepts pls or fls");
}

RunResult run_hybrid(const Topology& topology, const FlowSchedule& schedule, const HybridOptions& options) {
  return run_packet_loop(topology, schedule, options, true);
}

RunResult run_mode(const Topology& topology, const FlowSchedule& schedule, SimMode mode,
                   const HybridOptions& options) {
  if (mode == SimMode::HYBRID) return run_hybrid(topology, schedule, options);
  return run_pure(topology, schedule, mode, options);
}

}  // namespace gransim
