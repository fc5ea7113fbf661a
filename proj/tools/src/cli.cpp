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


#include "gransim_cli/cli.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gransim/predictor.hpp"
#include "gransim/scenario.hpp"

namespace gransim::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Relative file references inside a config are taken from the config's directory.
void resolve_paths(ScenarioConfig& c, const fs::path& config_path) {
  const fs::path base = config_path.parent_path();
  auto fix = [&](std::string& p) {
    if (!p.empty() && fs::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  fix(c.workload.schedule_file);
  fix(c.weights_path);
}

std::vector<SimMode> parse_modes(const std::string& list) {
  std::vector<SimMode> modes;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) modes.push_back(sim_mode_from_string(item));
  }
  return modes;
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

ScenarioConfig load(const Common& c) {
  ScenarioConfig cfg = parse_config(read_text(c.config));
  resolve_paths(cfg, c.config);
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.engine.seed = *c.seed;
  }
  if (!c.out.empty()) cfg.output_dir = c.out;
  return cfg;
}

std::vector<RunResult> run_comparison(const Scenario& s, SimMode baseline, const std::vector<SimMode>& candidates) {
  std::vector<RunResult> runs;
  runs.push_back(run_mode(s.topology, s.schedule, baseline, s.options));
  for (SimMode m : candidates) runs.push_back(run_mode(s.topology, s.schedule, m, s.options));
  return runs;
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw SimulationError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

int cmd_run(const Common& c, const std::string& mode, bool export_traces, std::ostream& out) {
  ScenarioConfig cfg = load(c);
  if (!mode.empty()) cfg.mode = sim_mode_from_string(mode);
  Scenario s = make_scenario(cfg);
  s.options.record_queue_traces = export_traces;
  RunResult r = run_mode(s.topology, s.schedule, cfg.mode, s.options);
  write_run_outputs(cfg.output_dir, r, cfg, export_traces);
  out << to_string(cfg.mode) << ": " << r.records.size() << " flows, jct " << num(r.summary.jct_s) << " s, "
      << r.summary.flow_phases << " flow phases -> " << cfg.output_dir << '\n';
  return kExitOk;
}

int cmd_compare(const Common& c, const std::string& baseline, const std::string& candidates, std::ostream& out) {
  const ScenarioConfig cfg = load(c);
  const SimMode base = sim_mode_from_string(baseline);
  const auto cands = parse_modes(candidates);
  const Scenario s = make_scenario(cfg);
  const auto runs = run_comparison(s, base, cands);
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    write_run_outputs(dir / (i == 0 ? "baseline_" + baseline : to_string(cands[i - 1])), runs[i], cfg, false);
  }
  const json report = comparison_to_json(runs.front(), {runs.begin() + 1, runs.end()}, cfg);
  write_json(dir / "report.json", report);
  for (std::size_t i = 1; i < runs.size(); ++i) {
    const ModeComparison m = compare_runs(runs[i], runs.front());
    out << to_string(m.mode) << " vs " << baseline << ": fct p99 " << num(m.fct_error_pct.p99) << "%, jct "
        << num(m.jct_error_pct) << "%, throughput " << num(m.throughput_error_pct) << "%, speedup "
        << num(m.speedup) << "x\n";
  }
  out << "report -> " << (dir / "report.json").string() << '\n';
  return kExitOk;
}

struct Axis {
  std::string key;
  std::vector<json> values;
};

Axis parse_vary(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--vary expects key=v1,v2,... (got '" + spec + "')");
  Axis a;
  a.key = spec.substr(0, eq);
  std::stringstream ss(spec.substr(eq + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      a.values.push_back(json::parse(item));
    } catch (const json::parse_error&) {
      a.values.emplace_back(item);
    }
  }
  if (a.values.empty()) throw ConfigError("--vary " + a.key + " has an empty value list");
  return a;
}

int cmd_sweep(const Common& c, const std::vector<std::string>& vary, const std::string& baseline,
              const std::string& candidates, std::ostream& out) {
  if (vary.empty()) throw ConfigError("sweep needs at least one --vary key=v1,v2,...");
  std::vector<Axis> axes;
  for (const auto& v : vary) axes.push_back(parse_vary(v));

  const std::string text = read_text(c.config);
  const ScenarioConfig base_cfg = load(c);
  const json doc = json::parse(text);
  const SimMode base = sim_mode_from_string(baseline);
  const auto cands = parse_modes(candidates);

  // Build and validate every grid point before running any of them.
  std::vector<std::vector<std::size_t>> grid{{}};
  for (const auto& a : axes) {
    std::vector<std::vector<std::size_t>> next;
    for (const auto& g : grid) {
      for (std::size_t i = 0; i < a.values.size(); ++i) {
        auto p = g;
        p.push_back(i);
        next.push_back(std::move(p));
      }
    }
    grid = std::move(next);
  }
  std::vector<ScenarioConfig> points;
  for (const auto& g : grid) {
    json d = doc;
    for (std::size_t k = 0; k < axes.size(); ++k) set_config_value(d, axes[k].key, axes[k].values[g[k]]);
    ScenarioConfig cfg = parse_config(d.dump());
    resolve_paths(cfg, c.config);
    cfg.seed = base_cfg.seed;
    cfg.engine.seed = base_cfg.seed;
    points.push_back(cfg);
  }

  const fs::path dir = base_cfg.output_dir;
  fs::create_directories(dir);
  std::ofstream csv(dir / "sweep.csv");
  if (!csv) throw SimulationError("cannot write " + (dir / "sweep.csv").string());
  csv << "point";
  for (const auto& a : axes) csv << ',' << a.key;
  csv << ",mode,jct_s,wall_clock_s,flow_fraction,fct_p99_error_pct,jct_error_pct,speedup\n";

  for (std::size_t p = 0; p < points.size(); ++p) {
    const Scenario s = make_scenario(points[p]);
    const auto runs = run_comparison(s, base, cands);
    json report = comparison_to_json(runs.front(), {runs.begin() + 1, runs.end()}, points[p]);
    json point = json::object();
    for (std::size_t k = 0; k < axes.size(); ++k) point[axes[k].key] = axes[k].values[grid[p][k]];
    report["point"] = point;
    const fs::path pdir = dir / ("point_" + std::to_string(p));
    fs::create_directories(pdir);
    write_json(pdir / "report.json", report);

    for (std::size_t i = 0; i < runs.size(); ++i) {
      const RunSummary& sum = runs[i].summary;
      ModeComparison m;
      if (i > 0) m = compare_runs(runs[i], runs.front());
      csv << p;
      for (std::size_t k = 0; k < axes.size(); ++k) {
        const json& v = axes[k].values[grid[p][k]];
        csv << ',' << (v.is_string() ? v.get<std::string>() : v.dump());
      }
      csv << ',' << to_string(sum.mode) << ',' << num(sum.jct_s) << ',' << num(sum.wall_clock_s) << ','
          << num(sum.flow_fraction) << ',' << num(m.fct_error_pct.p99) << ',' << num(m.jct_error_pct) << ','
          << num(i > 0 ? m.speedup : 1.0) << '\n';
    }
    out << "point " << p << ": " << point.dump() << " jct " << num(runs.front().summary.jct_s) << " s\n";
  }
  out << "sweep -> " << (dir / "sweep.csv").string() << '\n';
  return kExitOk;
}

int cmd_gen_workload(const Common& c, std::ostream& out) {
  const ScenarioConfig cfg = load(c);
  const Topology topo = build_topology(cfg);
  const FlowSchedule sched = build_schedule(cfg, topo);
  if (c.out.empty() || c.out == "-") {
    write_schedule_jsonl(out, sched);
  } else {
    std::ofstream f(c.out);
    if (!f) throw SimulationError("cannot write " + c.out);
    write_schedule_jsonl(f, sched);
  }
  return kExitOk;
}

int cmd_print_config(const std::string& path, std::ostream& out) {
  const ScenarioConfig cfg = path.empty() ? ScenarioConfig{} : parse_config(read_text(path));
  out << config_to_json(cfg).dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"gransim: packet/flow hybrid simulator for LLM training traffic in leaf-spine fabrics"};
  app.require_subcommand(1);
  app.footer("Config defaults (gransim print-config):\n" + config_to_json(ScenarioConfig{}).dump(2) +
             "\n\nExit codes: 0 success, 1 runtime failure, 2 config error.");

  Common common;
  std::string mode;
  bool export_traces = false;
  std::string baseline = "pls";
  std::string candidates = "fls,hybrid";
  std::vector<std::string> vary;

  auto add_common = [&](CLI::App* sub, bool with_seed) {
    sub->add_option("config", common.config, "Scenario config (JSON)")->required();
    if (with_seed) sub->add_option("--seed", common.seed, "Override the config seed");
  };

  auto* run_cmd = app.add_subcommand("run", "Simulate one mode and write flows.csv, summary.json, phases.jsonl");
  add_common(run_cmd, true);
  run_cmd->add_option("--mode", mode, "pls, fls or hybrid (default: config mode)");
  run_cmd->add_option("--out", common.out, "Output directory (default: config output_dir)");
  run_cmd->add_flag("--export-traces", export_traces, "Also write queue_traces.jsonl");

  auto* cmp_cmd = app.add_subcommand("compare", "Run a baseline and candidates on one schedule, write report.json");
  add_common(cmp_cmd, true);
  cmp_cmd->add_option("--baseline", baseline, "Baseline mode")->capture_default_str();
  cmp_cmd->add_option("--candidates", candidates, "Comma-separated candidate modes")->capture_default_str();
  cmp_cmd->add_option("--out", common.out, "Output directory (default: config output_dir)");

  auto* sweep_cmd = app.add_subcommand("sweep", "Compare over a grid of config values");
  add_common(sweep_cmd, true);
  sweep_cmd->add_option("--vary", vary, "key=v1,v2,... (dotted path or unique leaf name); repeatable");
  sweep_cmd->add_option("--baseline", baseline, "Baseline mode")->capture_default_str();
  sweep_cmd->add_option("--candidates", candidates, "Comma-separated candidate modes")->capture_default_str();
  sweep_cmd->add_option("--out", common.out, "Output directory (default: config output_dir)");

  auto* gen_cmd = app.add_subcommand("gen-workload", "Write the generated flow schedule as JSONL");
  add_common(gen_cmd, false);
  gen_cmd->add_option("--out", common.out, "Output file (default: stdout)");

  std::string print_path;
  auto* print_cmd = app.add_subcommand("print-config", "Print every config key with its value");
  print_cmd->add_option("config", print_path, "Config to resolve (default: built-in defaults)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run_cmd) return cmd_run(common, mode, export_traces, out);
    if (*cmp_cmd) return cmd_compare(common, baseline, candidates, out);
    if (*sweep_cmd) return cmd_sweep(common, vary, baseline, candidates, out);
    if (*gen_cmd) return cmd_gen_workload(common, out);
    if (*print_cmd) return cmd_print_config(print_path, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace gransim::cli
