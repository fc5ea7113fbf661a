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

#include "gransim/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <ostream>

namespace gransim {

std::string to_string(SimMode mode) {
  switch (mode) {
    case SimMode::PLS: return "pls";
    case SimMode::FLS: return "fls";
    case SimMode::HYBRID: return "hybrid";
  }
  return "unknown";
}

SimMode sim_mode_from_string(const std::string& s) {
  if (s == "pls") return SimMode::PLS;
  if (s == "fls") return SimMode::FLS;
  if (s == "hybrid") return SimMode::HYBRID;
  throw ConfigError("unknown mode '" + s + "' (expected pls|fls|hybrid)");
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw ConfigError("percentile of an empty set");
  if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("percentile rank must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

ErrorStats fct_error(std::span<const FlowRecord> candidate, std::span<const FlowRecord> baseline) {
  if (candidate.size() != baseline.size()) throw ConfigError("fct_error: flow sets differ in size");
  if (baseline.empty()) return {};
  std::map<FlowId, const FlowRecord*> base;
  for (const auto& r : baseline) base[r.id] = &r;
  std::vector<double> errors;
  errors.reserve(candidate.size());
  for (const auto& c : candidate) {
    auto it = base.find(c.id);
    if (it == base.end()) throw ConfigError("fct_error: flow " + std::to_string(c.id) + " missing from baseline");
    const double b = it->second->fct();
    if (!(b > 0.0)) throw ConfigError("fct_error: baseline FCT of flow " + std::to_string(c.id) + " is not positive");
    errors.push_back(std::abs(c.fct() - b) / b * 100.0);
  }
  ErrorStats s;
  s.p99 = percentile(errors, 0.99);
  s.max = *std::max_element(errors.begin(), errors.end());
  double sum = 0.0;
  for (double e : errors) sum += e;
  s.mean = sum / static_cast<double>(errors.size());
  return s;
}

double jct(std::span<const FlowRecord> records) {
  if (records.empty()) return 0.0;
  double last = -kInfinity;
  for (const auto& r : records) last = std::max(last, r.completion_s);
  return last - first_release(records);
}

double first_release(std::span<const FlowRecord> records) {
  double first = kInfinity;
  for (const auto& r : records) first = std::min(first, r.release_s);
  return records.empty() ? 0.0 : first;
}

double relative_error_percent(double candidate, double baseline) {
  if (baseline == 0.0) return candidate == 0.0 ? 0.0 : kInfinity;
  return std::abs(candidate - baseline) / std::abs(baseline) * 100.0;
}

namespace {

double counter_at(const LinkCounterTrace& trace, LinkId link, double t) {
  const auto& ts = trace.times;
  if (ts.empty()) return 0.0;
  if (t <= ts.front()) return trace.bits.front().at(link);
  if (t >= ts.back()) return trace.bits.back().at(link);
  const auto it = std::upper_bound(ts.begin(), ts.end(), t);
  const auto i = static_cast<std::size_t>(it - ts.begin());
  const double t0 = ts[i - 1];
  const double t1 = ts[i];
  const double b0 = trace.bits[i - 1].at(link);
  const double b1 = trace.bits[i].at(link);
  if (t1 == t0) return b1;
  return b0 + (b1 - b0) * (t - t0) / (t1 - t0);
}

}  // namespace

ThroughputSeries throughput(const LinkCounterTrace& trace, LinkId link, double t0, double t1, double interval) {
  if (!(t1 > t0)) throw ConfigError("throughput: empty interval");
  if (!(interval > 0.0)) throw ConfigError("throughput: bin width must be positive");
  ThroughputSeries s;
  for (double a = t0; a < t1; a += interval) {
    const double b = std::min(a + interval, t1);
    s.t.push_back(a);
    s.bps.push_back((counter_at(trace, link, b) - counter_at(trace, link, a)) / (b - a));
  }
  s.mean_bps = (counter_at(trace, link, t1) - counter_at(trace, link, t0)) / (t1 - t0);
  return s;
}

LinkId busiest_link(const LinkCounterTrace& trace) {
  if (trace.bits.empty()) return 0;
  const auto& last = trace.bits.back();
  return static_cast<LinkId>(std::max_element(last.begin(), last.end()) - last.begin());
}

double speedup(double candidate_wall_s, double baseline_wall_s) {
  if (!(candidate_wall_s > 0.0) || !(baseline_wall_s > 0.0)) throw ConfigError("speedup: wall clock must be > 0");
  return baseline_wall_s / candidate_wall_s;
}

namespace {

// Shortest round-trip decimal form.
std::string num(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace

void write_flows_csv(std::ostream& out, std::span<const FlowRecord> records) {
  out << "id,src,dst,size_bits,release_s,completion_s,mode\n";
  for (const auto& r : records) {
    out << r.id << ',' << r.src << ',' << r.dst << ',' << r.size_bits << ',' << num(r.release_s) << ','
        << num(r.completion_s) << ',' << to_string(r.mode) << '\n';
  }
}

}  // namespace gransim
