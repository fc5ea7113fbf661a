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

#include "gransim/workload.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>

namespace gransim {

namespace {

class ScheduleBuilder {
 public:
  FlowId add(HostId src, HostId dst, Bits size, double release, std::vector<FlowId> deps) {
    std::sort(deps.begin(), deps.end());
    deps.erase(std::unique(deps.begin(), deps.end()), deps.end());
    Flow f;
    f.id = static_cast<FlowId>(schedule_.flows.size());
    f.src = src;
    f.dst = dst;
    f.size_bits = size;
    f.release_s = release;
    f.deps = std::move(deps);
    schedule_.flows.push_back(std::move(f));
    return schedule_.flows.back().id;
  }

  void add_dep(FlowId flow, FlowId dep) {
    auto& deps = schedule_.flows.at(flow).deps;
    auto pos = std::lower_bound(deps.begin(), deps.end(), dep);
    if (pos == deps.end() || *pos != dep) deps.insert(pos, dep);
  }

  std::size_t size() const { return schedule_.flows.size(); }
  const Flow& flow(FlowId id) const { return schedule_.flows.at(id); }

  FlowSchedule take() { return std::move(schedule_); }

 private:
  FlowSchedule schedule_;
};

using DepLists = std::vector<std::vector<FlowId>>;

// Ring all-reduce as 2(G-1) dependent steps of G neighbour transfers. Step k
// on rank r waits for the step k-1 chunk that arrived at r. Returns, per
// rank, the final-step flow delivered to that rank.
std::vector<FlowId> ring_all_reduce(ScheduleBuilder& b, const std::vector<HostId>& ring, Bits total_bits,
                                    double release, const DepLists& entry) {
  const std::size_t g = ring.size();
  if (g < 2) return {};
  const Bits chunk = std::max<Bits>(1, total_bits / static_cast<Bits>(g));
  std::vector<FlowId> into(g);
  for (std::size_t step = 0; step < 2 * (g - 1); ++step) {
    std::vector<FlowId> next(g);
    for (std::size_t r = 0; r < g; ++r) {
      std::vector<FlowId> deps;
      if (step == 0) {
        if (r < entry.size()) deps = entry[r];
      } else {
        deps.push_back(into[r]);
      }
      const std::size_t dst = (r + 1) % g;
      next[dst] = b.add(ring[r], ring[dst], chunk, release, std::move(deps));
    }
    into = std::move(next);
  }
  return into;
}

void check_placement(const Placement& placement, std::size_t needed, const char* what) {
  if (placement.size() < needed) {
    throw ConfigError(std::string(what) + ": needs " + std::to_string(needed) + " hosts, placement has " +
                      std::to_string(placement.size()));
  }
  std::set<HostId> seen(placement.begin(), placement.begin() + static_cast<std::ptrdiff_t>(needed));
  if (seen.size() != needed) throw ConfigError(std::string(what) + ": placement maps ranks to duplicate hosts");
}

struct PipelineIds {
  // fwd[s][m]: stage s -> s+1; bwd[s][m]: stage s+1 -> s.
  std::vector<std::vector<FlowId>> fwd;
  std::vector<std::vector<FlowId>> bwd;
};

}  // namespace

void ModelSpec::validate() const {
  if (n_params == 0 || hidden_dim == 0 || n_layers == 0 || seq_len == 0 || micro_batch == 0 ||
      bytes_per_elem == 0) {
    throw ConfigError("model spec fields must all be >= 1");
  }
}

Bits ModelSpec::activation_bits() const {
  return static_cast<Bits>(micro_batch * seq_len * hidden_dim * bytes_per_elem * 8);
}

Bits ModelSpec::gradient_bits() const { return static_cast<Bits>(n_params * bytes_per_elem * 8); }

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::PP: return "pp";
    case Strategy::TP: return "tp";
    case Strategy::DP: return "dp";
    case Strategy::EP: return "ep";
    case Strategy::Mixed: return "mixed";
  }
  return "unknown";
}

Strategy strategy_from_string(const std::string& s) {
  if (s == "pp") return Strategy::PP;
  if (s == "tp") return Strategy::TP;
  if (s == "dp") return Strategy::DP;
  if (s == "ep") return Strategy::EP;
  if (s == "mixed") return Strategy::Mixed;
  throw ConfigError("unknown parallelism strategy '" + s + "' (expected pp|tp|dp|ep|mixed)");
}

void ParallelismSpec::validate() const {
  if (pp_stages == 0 || tp_degree == 0 || dp_degree == 0 || ep_degree == 0 || n_microbatches == 0 ||
      n_iterations == 0) {
    throw ConfigError("parallelism degrees and counts must all be >= 1");
  }
}

Placement linear_placement(std::size_t ranks) {
  Placement p(ranks);
  for (std::size_t i = 0; i < ranks; ++i) p[i] = static_cast<HostId>(i);
  return p;
}

Placement strided_placement(std::size_t ranks, const Topology& topology) {
  if (ranks > topology.host_count()) throw ConfigError("strided placement: more ranks than hosts");
  Placement p;
  p.reserve(ranks);
  const std::size_t leaves = topology.leaf_count();
  const std::size_t per_leaf = topology.hosts_per_leaf();
  for (std::size_t i = 0; i < ranks; ++i) {
    const std::size_t leaf = i % leaves;
    const std::size_t slot = i / leaves;
    p.push_back(static_cast<HostId>(leaf * per_leaf + slot));
  }
  return p;
}

namespace {

// 1F1B pipeline over `stages` hosts. entry_deps gate the first forward
// transfer. Forward m at stage s waits for the activation of m, the previous
// forward, and the backward of m - (S - s); the last stage turns every
// activation straight into a gradient.
PipelineIds build_pipeline(ScheduleBuilder& b, const std::vector<HostId>& stages, std::size_t microbatches,
                           Bits size, double release, const std::vector<FlowId>& entry_deps) {
  const std::size_t S = stages.size();
  PipelineIds ids;
  if (S < 2) return ids;
  const std::size_t M = microbatches;
  ids.fwd.assign(S - 1, std::vector<FlowId>(M));
  ids.bwd.assign(S - 1, std::vector<FlowId>(M));

  // Emit flows only once everything they depend on exists.
  std::vector<std::vector<bool>> fwd_done(S - 1, std::vector<bool>(M, false));
  std::vector<std::vector<bool>> bwd_done(S - 1, std::vector<bool>(M, false));

  auto fwd_ready = [&](std::size_t s, std::size_t m) {
    if (s > 0 && !fwd_done[s - 1][m]) return false;
    if (m > 0 && !fwd_done[s][m - 1]) return false;
    if (m >= S - s && !bwd_done[s][m - (S - s)]) return false;
    return true;
  };
  auto bwd_ready = [&](std::size_t s, std::size_t m) {
    if (s == S - 2) {
      if (!fwd_done[s][m]) return false;
    } else {
      if (!bwd_done[s + 1][m]) return false;
      const std::size_t sender = s + 1;
      const std::size_t paired = m + S - sender - 1;
      if (paired < M && !fwd_done[sender][paired]) return false;
    }
    if (m > 0 && !bwd_done[s][m - 1]) return false;
    return true;
  };

  std::size_t remaining = 2 * (S - 1) * M;
  while (remaining > 0) {
    bool progressed = false;
    for (std::size_t m = 0; m < M; ++m) {
      for (std::size_t s = 0; s + 1 < S; ++s) {
        if (!fwd_done[s][m] && fwd_ready(s, m)) {
          std::vector<FlowId> deps;
          if (s > 0) deps.push_back(ids.fwd[s - 1][m]);
          if (m > 0) deps.push_back(ids.fwd[s][m - 1]);
          if (m >= S - s) deps.push_back(ids.bwd[s][m - (S - s)]);
          if (s == 0 && m == 0) deps.insert(deps.end(), entry_deps.begin(), entry_deps.end());
          ids.fwd[s][m] = b.add(stages[s], stages[s + 1], size, release, std::move(deps));
          fwd_done[s][m] = true;
          --remaining;
          progressed = true;
        }
      }
      for (std::size_t s = S - 1; s-- > 0;) {
        if (!bwd_done[s][m] && bwd_ready(s, m)) {
          std::vector<FlowId> deps;
          if (s == S - 2) {
            deps.push_back(ids.fwd[s][m]);
          } else {
            deps.push_back(ids.bwd[s + 1][m]);
            const std::size_t sender = s + 1;
            const std::size_t paired = m + S - sender - 1;
            if (paired < M) deps.push_back(ids.fwd[sender][paired]);
          }
          if (m > 0) deps.push_back(ids.bwd[s][m - 1]);
          ids.bwd[s][m] = b.add(stages[s + 1], stages[s], size, release, std::move(deps));
          bwd_done[s][m] = true;
          --remaining;
          progressed = true;
        }
      }
    }
    if (!progressed) throw SimulationError("pipeline schedule construction stalled");
  }
  return ids;
}

}  // namespace

FlowSchedule gen_pp(const ModelSpec& model, const ParallelismSpec& par, const Placement& placement,
                    const WorkloadOptions& options) {
  model.validate();
  par.validate();
  const std::size_t S = par.pp_stages;
  check_placement(placement, S, "gen_pp");
  const Bits size = options.activation_bits.value_or(model.activation_bits());
  std::vector<HostId> stages(placement.begin(), placement.begin() + static_cast<std::ptrdiff_t>(S));

  ScheduleBuilder b;
  std::vector<FlowId> entry;
  for (std::size_t it = 0; it < par.n_iterations; ++it) {
    const double release = static_cast<double>(it) * options.iteration_gap_s;
    auto ids = build_pipeline(b, stages, par.n_microbatches, size, release, entry);
    if (S >= 2) entry = {ids.bwd[0].back()};
  }
  return b.take();
}

FlowSchedule gen_dp(const ModelSpec& model, const ParallelismSpec& par, const Placement& placement,
                    const WorkloadOptions& options) {
  model.validate();
  par.validate();
  const std::size_t G = par.dp_degree;
  check_placement(placement, G, "gen_dp");
  const Bits size = options.gradient_bits.value_or(model.gradient_bits());
  std::vector<HostId> ring(placement.begin(), placement.begin() + static_cast<std::ptrdiff_t>(G));

  ScheduleBuilder b;
  DepLists entry(G);
  for (std::size_t it = 0; it < par.n_iterations; ++it) {
    const double release = static_cast<double>(it) * options.iteration_gap_s;
    auto exits = ring_all_reduce(b, ring, size, release, entry);
    for (std::size_t r = 0; r < exits.size(); ++r) entry[r] = {exits[r]};
  }
  return b.take();
}

FlowSchedule gen_tp(const ModelSpec& model, const ParallelismSpec& par, const Placement& placement,
                    const WorkloadOptions& options) {
  model.validate();
  par.validate();
  const std::size_t G = par.tp_degree;
  check_placement(placement, G, "gen_tp");
  const Bits size = options.activation_bits.value_or(model.activation_bits());
  std::vector<HostId> ring(placement.begin(), placement.begin() + static_cast<std::ptrdiff_t>(G));

  ScheduleBuilder b;
  DepLists entry(G);
  std::size_t k = 0;
  for (std::size_t it = 0; it < par.n_iterations; ++it) {
    const double base = static_cast<double>(it) * options.iteration_gap_s;
    for (std::size_t m = 0; m < par.n_microbatches; ++m) {
      for (std::size_t l = 0; l < model.n_layers; ++l, ++k) {
        const double release = base + static_cast<double>(k) * options.tp_gap_s;
        auto exits = ring_all_reduce(b, ring, size, release, entry);
        for (std::size_t r = 0; r < exits.size(); ++r) entry[r] = {exits[r]};
      }
    }
  }
  return b.take();
}

FlowSchedule gen_ep_all_to_all(const ParallelismSpec& par, Bits chunk_bits, const Placement& placement,
                               double release_s) {
  par.validate();
  const std::size_t E = par.ep_degree;
  check_placement(placement, E, "gen_ep_all_to_all");
  if (chunk_bits <= 0) throw ConfigError("gen_ep_all_to_all: chunk must be positive");
  ScheduleBuilder b;
  for (std::size_t i = 0; i < E; ++i) {
    for (std::size_t j = 0; j < E; ++j) {
      if (i != j) b.add(placement[i], placement[j], chunk_bits, release_s, {});
    }
  }
  return b.take();
}

FlowSchedule gen_mixed(const ModelSpec& model, const ParallelismSpec& par, const Placement& placement,
                       const WorkloadOptions& options) {
  model.validate();
  par.validate();
  const std::size_t PP = par.pp_stages;
  const std::size_t TP = par.tp_degree;
  const std::size_t DP = par.dp_degree;
  const std::size_t EP = par.ep_degree;
  const std::size_t M = par.n_microbatches;
  if (EP > 1 && (EP > DP || DP % EP != 0)) {
    throw ConfigError("gen_mixed: ep_degree must divide dp_degree");
  }
  check_placement(placement, PP * TP * DP, "gen_mixed");

  const Bits act = options.activation_bits.value_or(model.activation_bits());
  const Bits grad = std::max<Bits>(
      1, options.gradient_bits.value_or(model.gradient_bits()) / static_cast<Bits>(PP * TP));
  const Bits chunk =
      options.ep_chunk_bits.value_or(std::max<Bits>(1, act / static_cast<Bits>(std::max<std::size_t>(EP, 1))));
  const std::size_t layers_per_stage = std::max<std::size_t>(1, model.n_layers / PP);

  auto host = [&](std::size_t d, std::size_t s, std::size_t t) { return placement[(d * PP + s) * TP + t]; };

  ScheduleBuilder b;
  // DP exit (or, without DP, all traffic) of the previous iteration per host.
  std::map<HostId, std::vector<FlowId>> iter_entry;
  auto entry_of = [&](HostId h) {
    auto e = iter_entry.find(h);
    return e == iter_entry.end() ? std::vector<FlowId>{} : e->second;
  };

  for (std::size_t it = 0; it < par.n_iterations; ++it) {
    const double release = static_cast<double>(it) * options.iteration_gap_s;
    const std::size_t first_flow = b.size();

    // Pass 1: pipelines with their own 1F1B edges.
    std::vector<std::vector<PipelineIds>> pipes(DP, std::vector<PipelineIds>(TP));
    if (PP >= 2) {
      for (std::size_t d = 0; d < DP; ++d) {
        for (std::size_t t = 0; t < TP; ++t) {
          std::vector<HostId> stages;
          for (std::size_t s = 0; s < PP; ++s) stages.push_back(host(d, s, t));
          pipes[d][t] = build_pipeline(b, stages, M, act, release, entry_of(host(d, 0, t)));
          for (std::size_t s = 1; s + 1 < PP; ++s) {
            for (FlowId e : entry_of(host(d, s, t))) b.add_dep(pipes[d][t].fwd[s][0], e);
          }
          for (FlowId e : entry_of(host(d, PP - 1, t))) b.add_dep(pipes[d][t].bwd[PP - 2][0], e);
        }
      }
    }

    // Forward compute of (d, s, m) on rank t starts once the activation has
    // arrived and, under 1F1B, the preceding backward gradient as well.
    auto compute_entry = [&](std::size_t d, std::size_t s, std::size_t m, std::size_t t) {
      std::vector<FlowId> deps;
      if (PP >= 2) {
        const PipelineIds& p = pipes[d][t];
        if (s > 0) deps.push_back(p.fwd[s - 1][m]);
        if (s + 1 < PP && m >= PP - s) deps.push_back(p.bwd[s][m - (PP - s)]);
      }
      if (m == 0) {
        auto e = entry_of(host(d, s, t));
        deps.insert(deps.end(), e.begin(), e.end());
      }
      return deps;
    };

    // Pass 2: tensor-parallel all-reduces inside every stage group, chained
    // over the stage's layers.
    // ready[d][s][m][t]: flows that must finish before rank t forwards (d, s, m).
    std::vector<std::vector<std::vector<std::vector<std::vector<FlowId>>>>> ready(
        DP, std::vector<std::vector<std::vector<std::vector<FlowId>>>>(
                PP, std::vector<std::vector<std::vector<FlowId>>>(M, std::vector<std::vector<FlowId>>(TP))));
    for (std::size_t d = 0; d < DP; ++d) {
      for (std::size_t s = 0; s < PP; ++s) {
        for (std::size_t m = 0; m < M; ++m) {
          for (std::size_t t = 0; t < TP; ++t) ready[d][s][m][t] = compute_entry(d, s, m, t);
          if (TP < 2) continue;
          std::vector<HostId> ring;
          for (std::size_t t = 0; t < TP; ++t) ring.push_back(host(d, s, t));
          DepLists entry = ready[d][s][m];
          std::vector<FlowId> exits;
          for (std::size_t l = 0; l < layers_per_stage; ++l) {
            exits = ring_all_reduce(b, ring, act, release, entry);
            for (std::size_t t = 0; t < TP; ++t) entry[t] = {exits[t]};
          }
          for (std::size_t t = 0; t < TP; ++t) ready[d][s][m][t] = {exits[t]};
        }
      }
    }

    // Pass 3: expert all-to-all across EP consecutive replicas of each
    // (stage, tp rank), after the tensor collectives.
    if (EP >= 2) {
      for (std::size_t g = 0; g < DP; g += EP) {
        for (std::size_t s = 0; s < PP; ++s) {
          for (std::size_t m = 0; m < M; ++m) {
            for (std::size_t t = 0; t < TP; ++t) {
              std::vector<std::vector<FlowId>> into(EP);
              for (std::size_t i = 0; i < EP; ++i) {
                for (std::size_t j = 0; j < EP; ++j) {
                  if (i == j) continue;
                  into[j].push_back(b.add(host(g + i, s, t), host(g + j, s, t), chunk, release,
                                          ready[g + i][s][m][t]));
                }
              }
              for (std::size_t j = 0; j < EP; ++j) ready[g + j][s][m][t] = into[j];
            }
          }
        }
      }
    }

    // Forward sends wait for the collectives of their stage.
    if (PP >= 2) {
      for (std::size_t d = 0; d < DP; ++d) {
        for (std::size_t t = 0; t < TP; ++t) {
          for (std::size_t s = 0; s + 1 < PP; ++s) {
            for (std::size_t m = 0; m < M; ++m) {
              for (FlowId r : ready[d][s][m][t]) b.add_dep(pipes[d][t].fwd[s][m], r);
            }
          }
        }
      }
    }

    // Pass 4: data-parallel all-reduce per (stage, tp rank) at the iteration
    // boundary, after all backward traffic touching each member host.
    std::set<FlowId> bwd_ids;
    for (const auto& row : pipes) {
      for (const auto& p : row) {
        for (const auto& v : p.bwd) bwd_ids.insert(v.begin(), v.end());
      }
    }
    std::map<HostId, std::vector<FlowId>> touching;
    for (std::size_t i = first_flow; i < b.size(); ++i) {
      const Flow& f = b.flow(static_cast<FlowId>(i));
      if (PP >= 2 && !bwd_ids.count(f.id)) continue;
      touching[f.src].push_back(f.id);
      touching[f.dst].push_back(f.id);
    }

    std::map<HostId, std::vector<FlowId>> next_entry;
    if (DP >= 2) {
      for (std::size_t s = 0; s < PP; ++s) {
        for (std::size_t t = 0; t < TP; ++t) {
          std::vector<HostId> ring;
          DepLists entry(DP);
          for (std::size_t d = 0; d < DP; ++d) {
            const HostId h = host(d, s, t);
            ring.push_back(h);
            entry[d] = touching.count(h) ? touching[h] : entry_of(h);
          }
          auto exits = ring_all_reduce(b, ring, grad, release, entry);
          for (std::size_t d = 0; d < DP; ++d) next_entry[host(d, s, t)] = {exits[d]};
        }
      }
    } else {
      next_entry = std::move(touching);
    }
    iter_entry = std::move(next_entry);
  }
  return b.take();
}

FlowSchedule generate(const ModelSpec& model, const ParallelismSpec& par, const Placement& placement,
                      const WorkloadOptions& options) {
  switch (par.strategy) {
    case Strategy::PP: return gen_pp(model, par, placement, options);
    case Strategy::TP: return gen_tp(model, par, placement, options);
    case Strategy::DP: return gen_dp(model, par, placement, options);
    case Strategy::EP: {
      const Bits chunk = options.ep_chunk_bits.value_or(
          std::max<Bits>(1, options.activation_bits.value_or(model.activation_bits()) /
                                static_cast<Bits>(par.ep_degree)));
      FlowSchedule out;
      for (std::size_t it = 0; it < par.n_iterations; ++it) {
        append_schedule(out, gen_ep_all_to_all(par, chunk, placement,
                                               static_cast<double>(it) * options.iteration_gap_s));
      }
      return out;
    }
    case Strategy::Mixed: return gen_mixed(model, par, placement, options);
  }
  throw ConfigError("unknown strategy");
}

void append_schedule(FlowSchedule& base, const FlowSchedule& other) {
  const FlowId offset = static_cast<FlowId>(base.flows.size());
  for (Flow f : other.flows) {
    f.id += offset;
    for (auto& d : f.deps) d += offset;
    base.flows.push_back(std::move(f));
  }
}

void write_schedule_jsonl(std::ostream& out, const FlowSchedule& schedule) {
  for (const auto& f : schedule.flows) {
    nlohmann::json j = {{"id", f.id},           {"src", f.src},        {"dst", f.dst},
                        {"size_bits", f.size_bits}, {"release_s", f.release_s}, {"deps", f.deps},
                        {"weight", f.weight}};
    if (std::isfinite(f.min_bandwidth_bps)) j["min_bandwidth_bps"] = f.min_bandwidth_bps;
    out << j.dump() << '\n';
  }
}

FlowSchedule read_schedule_jsonl(std::istream& in) {
  FlowSchedule s;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      Flow f;
      f.id = j.at("id").get<FlowId>();
      f.src = j.at("src").get<HostId>();
      f.dst = j.at("dst").get<HostId>();
      f.size_bits = j.at("size_bits").get<Bits>();
      f.release_s = j.value("release_s", 0.0);
      f.deps = j.value("deps", std::vector<FlowId>{});
      f.weight = j.value("weight", 1.0);
      f.min_bandwidth_bps = j.value("min_bandwidth_bps", kInfinity);
      s.flows.push_back(std::move(f));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("schedule line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  std::sort(s.flows.begin(), s.flows.end(), [](const Flow& a, const Flow& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < s.flows.size(); ++i) {
    if (s.flows[i].id != i) throw ConfigError("schedule ids must be dense 0..n-1");
  }
  return s;
}

}  // namespace gransim
