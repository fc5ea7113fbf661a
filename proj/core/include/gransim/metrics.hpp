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

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "gransim/core_model.hpp"
#include "gransim/flow_engine.hpp"

namespace gransim {

enum class SimMode : std::uint8_t { PLS, FLS, HYBRID };

std::string to_string(SimMode mode);
SimMode sim_mode_from_string(const std::string& s);

struct FlowRecord {
  FlowId id = 0;
  HostId src = 0;
  HostId dst = 0;
  Bits size_bits = 0;
  /// Scheduled release.
  double release_s = 0.0;
  /// Effective start: release, or the last dependency's completion if later.
  double start_s = 0.0;
  double completion_s = 0.0;
  /// Granularity in which the flow finished.
  SimMode mode = SimMode::PLS;

  double fct() const { return completion_s - start_s; }
};

/// Type-7 (linear interpolation) quantile, q in [0, 1].
double percentile(std::vector<double> values, double q);

struct ErrorStats {
  double p99 = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

/// Relative FCT errors in percent, matched by flow id.
ErrorStats fct_error(std::span<const FlowRecord> candidate, std::span<const FlowRecord> baseline);

/// max completion - min release.
double jct(std::span<const FlowRecord> records);
/// Earliest scheduled release.
double first_release(std::span<const FlowRecord> records);

/// |candidate - baseline| / |baseline| in percent.
double relative_error_percent(double candidate, double baseline);

struct ThroughputSeries {
  std::vector<double> t;
  std::vector<double> bps;
  double mean_bps = 0.0;
};

/// Carried-bit rate on `link` over [t0, t1] in bins of `interval`, from a
/// cumulative counter trace interpolated linearly between samples.
ThroughputSeries throughput(const LinkCounterTrace& trace, LinkId link, double t0, double t1, double interval);

/// Link with the largest final counter.
LinkId busiest_link(const LinkCounterTrace& trace);

/// baseline / candidate.
double speedup(double candidate_wall_s, double baseline_wall_s);

struct RunSummary {
  SimMode mode = SimMode::PLS;
  std::uint64_t seed = 0;
  std::size_t flows = 0;
  double jct_s = 0.0;
  double wall_clock_s = 0.0;
  std::size_t flow_phases = 0;
  /// Share of [first release, last completion] simulated at flow level.
  double flow_fraction = 0.0;
  std::uint64_t events = 0;
  std::vector<double> link_mean_throughput_bps;
  Bits delivered_bits = 0;
};

void write_flows_csv(std::ostream& out, std::span<const FlowRecord> records);

}  // namespace gransim
