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

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gransim/hybrid.hpp"
#include "gransim/workload.hpp"

namespace gransim {

struct TopologyConfig {
  std::size_t leaves = 2;
  std::size_t spines = 2;
  std::size_t hosts_per_leaf = 4;
  double link_capacity_bps = 200e9;
  double link_latency_s = 10e-6;
};

struct WorkloadConfig {
  ModelSpec model;
  ParallelismSpec parallelism;
  /// "linear", "strided", or explicit hosts in placement_hosts.
  std::string placement = "linear";
  std::vector<HostId> placement_hosts;
  WorkloadOptions options;
  /// When set, the schedule is read from this JSONL file instead of generated.
  std::string schedule_file;
};

struct ScenarioConfig {
  TopologyConfig topology;
  WorkloadConfig workload;
  ControlConfig control;
  /// Unset means 2% of link capacity.
  std::optional<double> eps_bw_bps;
  /// Unset means 10 sample intervals.
  std::optional<double> min_steady_s;
  PacketEngineConfig engine;
  RestorationMode restoration = RestorationMode::Persistence;
  std::string weights_path;
  double allocation_slack = 0.01;
  SimMode mode = SimMode::HYBRID;
  std::uint64_t seed = 1;
  std::string output_dir = "out";

  /// ControlConfig with the capacity- and interval-dependent defaults filled in.
  ControlConfig resolved_control() const;
  void validate() const;
};

/// Parses a scenario document. Unknown keys and type mismatches raise
/// ConfigError naming the key (and its line when it can be located).
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::filesystem::path& path);
/// Every field, defaults included.
nlohmann::json config_to_json(const ScenarioConfig& config);

/// Sets a scalar addressed by a dotted path ("workload.parallelism.dp_degree")
/// or by a leaf name that is unique in the schema ("dp_degree").
void set_config_value(nlohmann::json& doc, const std::string& key, const nlohmann::json& value);

Topology build_topology(const ScenarioConfig& config);
FlowSchedule build_schedule(const ScenarioConfig& config, const Topology& topology);
HybridOptions build_options(const ScenarioConfig& config);

/// Everything needed for one run, built once so several modes share it.
struct Scenario {
  ScenarioConfig config;
  Topology topology;
  FlowSchedule schedule;
  HybridOptions options;
};

Scenario make_scenario(const ScenarioConfig& config);

nlohmann::json summary_to_json(const RunSummary& summary, const ScenarioConfig& config);

/// flows.csv, summary.json, phases.jsonl and, when asked, queue_traces.jsonl.
void write_run_outputs(const std::filesystem::path& dir, const RunResult& result, const ScenarioConfig& config,
                       bool export_traces);

/// Groups queue_traces.jsonl rows by port, in file order. Rows of one port
/// are spaced by the sample interval except across flow phases and idle gaps.
std::map<LinkId, std::vector<double>> read_queue_traces(std::istream& in);

struct ModeComparison {
  SimMode mode = SimMode::PLS;
  ErrorStats fct_error_pct;
  double jct_error_pct = 0.0;
  double throughput_error_pct = 0.0;
  double speedup = 0.0;
};

/// Errors of `candidate` against `baseline` on the baseline's busiest link.
ModeComparison compare_runs(const RunResult& candidate, const RunResult& baseline);

nlohmann::json comparison_to_json(const RunResult& baseline, const std::vector<RunResult>& candidates,
                                  const ScenarioConfig& config);

}  // namespace gransim
