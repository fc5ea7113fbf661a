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

#include "gransim/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace gransim {

using nlohmann::json;

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
json optional_bits(const std::optional<Bits>& v) { return v ? json(*v) : json(nullptr); }

std::string line_hint(const std::string& text, const std::string& key) {
  const auto pos = text.find("\"" + key + "\"");
  if (pos == std::string::npos) return "";
  const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n');
  return " (line " + std::to_string(line) + ")";
}

std::string join_path(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

// Schema check against the fully-defaulted document: every key must exist
// there, and scalars must keep their kind.
void check_against(const json& doc, const json& schema, const std::string& prefix, const std::string& text) {
  if (!doc.is_object()) throw ConfigError("'" + (prefix.empty() ? "<root>" : prefix) + "' must be an object");
  for (const auto& [key, value] : doc.items()) {
    const std::string path = join_path(prefix, key);
    if (!schema.contains(key)) throw ConfigError("unknown config key '" + path + "'" + line_hint(text, key));
    const json& want = schema.at(key);
    const std::string where = "config key '" + path + "'" + line_hint(text, key);
    if (want.is_object()) {
      check_against(value, want, path, text);
    } else if (path == "workload.placement") {
      if (!value.is_string() && !value.is_array()) throw ConfigError(where + " must be a string or a host list");
    } else if (want.is_string()) {
      if (!value.is_string()) throw ConfigError(where + " must be a string");
    } else if (want.is_number_unsigned() || want.is_number_integer()) {
      if (!value.is_number_integer() || value.get<long long>() < 0) {
        throw ConfigError(where + " must be a non-negative integer");
      }
    } else if (want.is_number() || want.is_null()) {
      if (!value.is_number() && !value.is_null()) throw ConfigError(where + " must be a number");
    }
  }
}

void merge_into(json& base, const json& patch) {
  for (const auto& [key, value] : patch.items()) {
    if (value.is_object() && base.contains(key) && base[key].is_object()) {
      merge_into(base[key], value);
    } else {
      base[key] = value;
    }
  }
}

template <typename T>
std::optional<T> opt(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<T>();
}

ScenarioConfig from_full_json(const json& j) {
  ScenarioConfig c;
  const json& t = j.at("topology");
  c.topology.leaves = t.at("leaves").get<std::size_t>();
  c.topology.spines = t.at("spines").get<std::size_t>();
  c.topology.hosts_per_leaf = t.at("hosts_per_leaf").get<std::size_t>();
  c.topology.link_capacity_bps = t.at("link_capacity_bps").get<double>();
  c.topology.link_latency_s = t.at("link_latency_s").get<double>();

  const json& w = j.at("workload");
  c.workload.parallelism.strategy = strategy_from_string(w.at("strategy").get<std::string>());
  const json& m = w.at("model");
  c.workload.model.n_params = m.at("n_params").get<std::uint64_t>();
  c.workload.model.hidden_dim = m.at("hidden_dim").get<std::uint64_t>();
  c.workload.model.n_layers = m.at("n_layers").get<std::uint64_t>();
  c.workload.model.seq_len = m.at("seq_len").get<std::uint64_t>();
  c.workload.model.micro_batch = m.at("micro_batch").get<std::uint64_t>();
  c.workload.model.bytes_per_elem = m.at("bytes_per_elem").get<std::uint64_t>();
  const json& p = w.at("parallelism");
  c.workload.parallelism.pp_stages = p.at("pp_stages").get<std::size_t>();
  c.workload.parallelism.tp_degree = p.at("tp_degree").get<std::size_t>();
  c.workload.parallelism.dp_degree = p.at("dp_degree").get<std::size_t>();
  c.workload.parallelism.ep_degree = p.at("ep_degree").get<std::size_t>();
  c.workload.parallelism.n_microbatches = p.at("microbatches").get<std::size_t>();
  c.workload.parallelism.n_iterations = p.at("iterations").get<std::size_t>();
  if (w.at("placement").is_array()) {
    c.workload.placement = "explicit";
    for (const auto& h : w.at("placement")) {
      if (!h.is_number_integer() || h.get<long long>() < 0) {
        throw ConfigError("config key 'workload.placement' must list host ids");
      }
      c.workload.placement_hosts.push_back(h.get<HostId>());
    }
  } else {
    c.workload.placement = w.at("placement").get<std::string>();
  }
  c.workload.options.activation_bits = opt<Bits>(w.at("activation_bits"));
  c.workload.options.gradient_bits = opt<Bits>(w.at("gradient_bits"));
  c.workload.options.ep_chunk_bits = opt<Bits>(w.at("ep_chunk_bits"));
  c.workload.options.iteration_gap_s = w.at("iteration_gap_s").get<double>();
  c.workload.options.tp_gap_s = w.at("tp_gap_s").get<double>();
  c.workload.schedule_file = w.at("schedule_file").get<std::string>();

  const json& k = j.at("control");
  c.eps_bw_bps = opt<double>(k.at("eps_bw_bps"));
  c.control.eps_q_bits = k.at("eps_q_bits").get<double>();
  c.control.window_len = k.at("window_len").get<std::size_t>();
  c.control.sample_interval_s = k.at("sample_interval_s").get<double>();
  c.control.n_stable = k.at("n_stable").get<std::size_t>();
  c.min_steady_s = opt<double>(k.at("min_steady_s"));
  c.control.max_steady_s = k.at("max_steady_s").get<double>();

  const json& e = j.at("engine");
  c.engine.mtu_bits = e.at("mtu_bits").get<Bits>();
  c.engine.header_bits = e.at("header_bits").get<Bits>();
  c.engine.ecn_threshold_bits = e.at("ecn_threshold_bits").get<Bits>();
  c.engine.host_queue_packets = e.at("host_queue_packets").get<std::int64_t>();
  c.engine.dctcp_gain = e.at("dctcp_gain").get<double>();
  c.engine.initial_alpha = e.at("initial_alpha").get<double>();

  const json& r = j.at("restoration");
  c.restoration = restoration_mode_from_string(r.at("mode").get<std::string>());
  c.weights_path = r.at("weights").get<std::string>();
  c.allocation_slack = r.at("allocation_slack").get<double>();

  c.mode = sim_mode_from_string(j.at("mode").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  c.output_dir = j.at("output_dir").get<std::string>();
  c.engine.seed = c.seed;
  return c;
}

void collect_leaves(const json& j, const std::string& prefix, std::map<std::string, std::vector<std::string>>& out) {
  for (const auto& [key, value] : j.items()) {
    const std::string path = join_path(prefix, key);
    if (value.is_object()) {
      collect_leaves(value, path, out);
    } else {
      out[key].push_back(path);
    }
  }
}

std::size_t ranks_needed(const ParallelismSpec& p) {
  switch (p.strategy) {
    case Strategy::PP: return p.pp_stages;
    case Strategy::TP: return p.tp_degree;
    case Strategy::DP: return p.dp_degree;
    case Strategy::EP: return p.ep_degree;
    case Strategy::Mixed: return p.pp_stages * p.tp_degree * p.dp_degree;
  }
  return 0;
}

}  // namespace

ControlConfig ScenarioConfig::resolved_control() const {
  ControlConfig c = control;
  c.eps_bw_bps = eps_bw_bps.value_or(0.02 * topology.link_capacity_bps);
  c.min_steady_s = min_steady_s.value_or(10.0 * control.sample_interval_s);
  return c;
}

void ScenarioConfig::validate() const {
  if (topology.leaves == 0 || topology.spines == 0 || topology.hosts_per_leaf == 0) {
    throw ConfigError("topology counts must be >= 1");
  }
  resolved_control().validate();
  engine.validate();
  workload.model.validate();
  workload.parallelism.validate();
  if (allocation_slack < 0.0) throw ConfigError("restoration.allocation_slack must be >= 0");
  if (restoration == RestorationMode::Attention && weights_path.empty()) {
    throw ConfigError("restoration.mode 'attention' needs restoration.weights");
  }
  if (workload.placement != "linear" && workload.placement != "strided" && workload.placement != "explicit") {
    throw ConfigError("workload.placement must be 'linear', 'strided' or a host list");
  }
}

nlohmann::json config_to_json(const ScenarioConfig& c) {
  json j;
  j["topology"] = {{"leaves", c.topology.leaves},
                   {"spines", c.topology.spines},
                   {"hosts_per_leaf", c.topology.hosts_per_leaf},
                   {"link_capacity_bps", c.topology.link_capacity_bps},
                   {"link_latency_s", c.topology.link_latency_s}};
  const auto& w = c.workload;
  j["workload"] = {
      {"strategy", to_string(w.parallelism.strategy)},
      {"model",
       {{"n_params", w.model.n_params},
        {"hidden_dim", w.model.hidden_dim},
        {"n_layers", w.model.n_layers},
        {"seq_len", w.model.seq_len},
        {"micro_batch", w.model.micro_batch},
        {"bytes_per_elem", w.model.bytes_per_elem}}},
      {"parallelism",
       {{"pp_stages", w.parallelism.pp_stages},
        {"tp_degree", w.parallelism.tp_degree},
        {"dp_degree", w.parallelism.dp_degree},
        {"ep_degree", w.parallelism.ep_degree},
        {"microbatches", w.parallelism.n_microbatches},
        {"iterations", w.parallelism.n_iterations}}},
      {"placement", w.placement == "explicit" ? json(w.placement_hosts) : json(w.placement)},
      {"activation_bits", optional_bits(w.options.activation_bits)},
      {"gradient_bits", optional_bits(w.options.gradient_bits)},
      {"ep_chunk_bits", optional_bits(w.options.ep_chunk_bits)},
      {"iteration_gap_s", w.options.iteration_gap_s},
      {"tp_gap_s", w.options.tp_gap_s},
      {"schedule_file", w.schedule_file}};
  j["control"] = {{"eps_bw_bps", optional_number(c.eps_bw_bps)},
                  {"eps_q_bits", c.control.eps_q_bits},
                  {"window_len", c.control.window_len},
                  {"sample_interval_s", c.control.sample_interval_s},
                  {"n_stable", c.control.n_stable},
                  {"min_steady_s", optional_number(c.min_steady_s)},
                  {"max_steady_s", c.control.max_steady_s}};
  j["engine"] = {{"mtu_bits", c.engine.mtu_bits},
                 {"header_bits", c.engine.header_bits},
                 {"ecn_threshold_bits", c.engine.ecn_threshold_bits},
                 {"host_queue_packets", c.engine.host_queue_packets},
                 {"dctcp_gain", c.engine.dctcp_gain},
                 {"initial_alpha", c.engine.initial_alpha}};
  j["restoration"] = {
      {"mode", to_string(c.restoration)}, {"weights", c.weights_path}, {"allocation_slack", c.allocation_slack}};
  j["mode"] = to_string(c.mode);
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  return j;
}

ScenarioConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  const json schema = config_to_json(ScenarioConfig{});
  check_against(doc, schema, "", text);
  json full = schema;
  merge_into(full, doc);
  ScenarioConfig c;
  try {
    c = from_full_json(full);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config value has the wrong type: ") + e.what());
  }
  c.validate();
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void set_config_value(nlohmann::json& doc, const std::string& key, const nlohmann::json& value) {
  const json schema = config_to_json(ScenarioConfig{});
  std::string path = key;
  if (key.find('.') == std::string::npos) {
    std::map<std::string, std::vector<std::string>> leaves;
    collect_leaves(schema, "", leaves);
    auto it = leaves.find(key);
    if (it == leaves.end()) throw ConfigError("unknown config key '" + key + "'");
    if (it->second.size() != 1) throw ConfigError("config key '" + key + "' is ambiguous; use its dotted path");
    path = it->second.front();
  }
  const json::json_pointer ptr("/" + [&] {
    std::string p = path;
    std::replace(p.begin(), p.end(), '.', '/');
    return p;
  }());
  if (!schema.contains(ptr)) throw ConfigError("unknown config key '" + key + "'");
  json* node = &doc;
  std::string rest = path;
  while (true) {
    const auto dot = rest.find('.');
    const std::string head = rest.substr(0, dot);
    if (dot == std::string::npos) {
      (*node)[head] = value;
      break;
    }
    if (!node->contains(head) || !(*node)[head].is_object()) (*node)[head] = json::object();
    node = &(*node)[head];
    rest = rest.substr(dot + 1);
  }
}

Topology build_topology(const ScenarioConfig& c) {
  return build_leaf_spine(c.topology.leaves, c.topology.spines, c.topology.hosts_per_leaf,
                          c.topology.link_capacity_bps, c.topology.link_latency_s);
}

FlowSchedule build_schedule(const ScenarioConfig& c, const Topology& topology) {
  FlowSchedule schedule;
  if (!c.workload.schedule_file.empty()) {
    std::ifstream in(c.workload.schedule_file);
    if (!in) throw ConfigError("cannot read workload.schedule_file " + c.workload.schedule_file);
    schedule = read_schedule_jsonl(in);
  } else {
    const auto& par = c.workload.parallelism;
    const std::size_t ranks = ranks_needed(par);
    if (ranks > topology.host_count()) {
      throw ConfigError("workload needs " + std::to_string(ranks) + " hosts, topology has " +
                        std::to_string(topology.host_count()));
    }
    Placement placement;
    if (c.workload.placement == "explicit") {
      placement = c.workload.placement_hosts;
    } else if (c.workload.placement == "strided") {
      placement = strided_placement(ranks, topology);
    } else {
      placement = linear_placement(ranks);
    }
    for (HostId h : placement) {
      if (h >= topology.host_count()) throw ConfigError("placement names unknown host " + std::to_string(h));
    }
    schedule = generate(c.workload.model, par, placement, c.workload.options);
  }
  validate_schedule(schedule, topology.host_count());
  return schedule;
}

HybridOptions build_options(const ScenarioConfig& c) {
  HybridOptions o;
  o.control = c.resolved_control();
  o.engine = c.engine;
  o.engine.seed = c.seed;
  o.restoration = c.restoration;
  o.allocation_slack = c.allocation_slack;
  if (c.restoration == RestorationMode::Attention) {
    o.predictor = std::make_shared<AttentionPredictor>(load_weights(c.weights_path));
  }
  return o;
}

Scenario make_scenario(const ScenarioConfig& config) {
  config.validate();
  Scenario s{config, build_topology(config), {}, build_options(config)};
  s.schedule = build_schedule(config, s.topology);
  return s;
}

nlohmann::json summary_to_json(const RunSummary& s, const ScenarioConfig& config) {
  const auto& tput = s.link_mean_throughput_bps;
  const auto busiest = tput.empty() ? std::size_t{0}
                                    : static_cast<std::size_t>(std::max_element(tput.begin(), tput.end()) - tput.begin());
  const ControlConfig cc = config.resolved_control();
  return json{{"mode", to_string(s.mode)},
              {"seed", s.seed},
              {"flows", s.flows},
              {"jct_s", s.jct_s},
              {"wall_clock_s", s.wall_clock_s},
              {"flow_phases", s.flow_phases},
              {"flow_fraction", s.flow_fraction},
              {"events", s.events},
              {"delivered_bits", s.delivered_bits},
              {"busiest_link", busiest},
              {"busiest_link_mean_throughput_bps", tput.empty() ? 0.0 : tput[busiest]},
              {"control",
               {{"eps_bw_bps", cc.eps_bw_bps},
                {"eps_q_bits", cc.eps_q_bits},
                {"window_len", cc.window_len},
                {"sample_interval_s", cc.sample_interval_s},
                {"n_stable", cc.n_stable},
                {"min_steady_s", cc.min_steady_s},
                {"max_steady_s", cc.max_steady_s}}},
              {"engine",
               {{"mtu_bits", config.engine.mtu_bits},
                {"header_bits", config.engine.header_bits},
                {"ecn_threshold_bits", config.engine.ecn_threshold_bits},
                {"host_queue_packets", config.engine.host_queue_packets},
                {"dctcp_gain", config.engine.dctcp_gain},
                {"initial_alpha", config.engine.initial_alpha}}},
              {"restoration", to_string(config.restoration)}};
}

void write_run_outputs(const std::filesystem::path& dir, const RunResult& result, const ScenarioConfig& config,
                       bool export_traces) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw SimulationError("cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("flows.csv");
    write_flows_csv(out, result.records);
  }
  {
    auto out = open("summary.json");
    out << summary_to_json(result.summary, config).dump(2) << '\n';
  }
  {
    std::vector<std::pair<double, json>> lines;
    for (const auto& p : result.phases) {
      lines.emplace_back(p.t_begin, json{{"type", "phase"},
                                         {"t_begin", p.t_begin},
                                         {"t_end", p.t_end},
                                         {"mode", p.mode},
                                         {"reason", p.reason}});
    }
    for (const auto& t : result.transitions) {
      json depths = json::object();
      for (const auto& [port, d] : t.predicted_depths) depths[std::to_string(port)] = d;
      lines.emplace_back(t.t, json{{"type", "transition"},
                                   {"t", t.t},
                                   {"direction", t.direction},
                                   {"flows", t.flows},
                                   {"tau_steady", t.tau_steady},
                                   {"sum_delta_tau", t.sum_delta_tau},
                                   {"predicted_depths", depths},
                                   {"clamped", t.clamped},
                                   {"note", t.note}});
    }
    std::stable_sort(lines.begin(), lines.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    auto out = open("phases.jsonl");
    for (const auto& [t, line] : lines) out << line.dump() << '\n';
  }
  if (export_traces) {
    auto out = open("queue_traces.jsonl");
    for (const auto& q : result.queue_trace) {
      out << json{{"port", q.port}, {"t", q.t}, {"depth_bits", q.depth_bits}}.dump() << '\n';
    }
  }
}

std::map<LinkId, std::vector<double>> read_queue_traces(std::istream& in) {
  std::map<LinkId, std::vector<double>> traces;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      const json row = json::parse(line);
      const auto depth = row.at("depth_bits").get<Bits>();
      if (depth < 0) throw ConfigError("negative depth");
      traces[row.at("port").get<LinkId>()].push_back(static_cast<double>(depth));
    } catch (const std::exception& e) {
      throw ConfigError("queue trace line " + std::to_string(n) + ": " + e.what());
    }
  }
  return traces;
}

ModeComparison compare_runs(const RunResult& candidate, const RunResult& baseline) {
  ModeComparison m;
  m.mode = candidate.summary.mode;
  m.fct_error_pct = fct_error(candidate.records, baseline.records);
  m.jct_error_pct = relative_error_percent(candidate.summary.jct_s, baseline.summary.jct_s);
  if (!baseline.link_trace.bits.empty() && baseline.summary.jct_s > 0.0 && candidate.summary.jct_s > 0.0) {
    const LinkId link = busiest_link(baseline.link_trace);
    const double t0 = first_release(baseline.records);
    const double b = throughput(baseline.link_trace, link, t0, t0 + baseline.summary.jct_s, baseline.summary.jct_s)
                         .mean_bps;
    const double c =
        throughput(candidate.link_trace, link, t0, t0 + candidate.summary.jct_s, candidate.summary.jct_s).mean_bps;
    m.throughput_error_pct = relative_error_percent(c, b);
  }
  m.speedup = speedup(std::max(candidate.summary.wall_clock_s, 1e-9), std::max(baseline.summary.wall_clock_s, 1e-9));
  return m;
}

nlohmann::json comparison_to_json(const RunResult& baseline, const std::vector<RunResult>& candidates,
                                  const ScenarioConfig& config) {
  json cands = json::object();
  for (const auto& c : candidates) {
    const ModeComparison m = compare_runs(c, baseline);
    cands[to_string(c.summary.mode)] = {
        {"fct_error_pct", {{"p99", m.fct_error_pct.p99}, {"max", m.fct_error_pct.max}, {"mean", m.fct_error_pct.mean}}},
        {"jct_error_pct", m.jct_error_pct},
        {"throughput_error_pct", m.throughput_error_pct},
        {"speedup", m.speedup},
        {"summary", summary_to_json(c.summary, config)}};
  }
  return json{{"baseline", to_string(baseline.summary.mode)},
              {"seed", config.seed},
              {"baseline_summary", summary_to_json(baseline.summary, config)},
              {"candidates", std::move(cands)}};
}

}  // namespace gransim
