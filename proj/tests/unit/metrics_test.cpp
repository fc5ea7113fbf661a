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

#include <gtest/gtest.h>

#include <sstream>

#include "gransim/hybrid.hpp"
#include "gransim/metrics.hpp"
#include "test_support.hpp"

namespace gransim {
namespace {

FlowRecord record(FlowId id, double start, double end) {
  FlowRecord r;
  r.id = id;
  r.release_s = start;
  r.start_s = start;
  r.completion_s = end;
  return r;
}

TEST(Percentile, LinearInterpolation) {
  EXPECT_NEAR(percentile({1, 2, 3, 4}, 0.99), 3.97, 1e-12);
  EXPECT_DOUBLE_EQ(percentile({4, 1, 3, 2}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(percentile({9}, 0.99), 9.0);
  EXPECT_THROW(percentile({}, 0.5), ConfigError);
  EXPECT_THROW(percentile({1}, 1.5), ConfigError);
}

TEST(FctError, IdenticalRunsHaveNoError) {
  const std::vector<FlowRecord> a = {record(0, 0, 1), record(1, 0.5, 2)};
  const auto e = fct_error(a, a);
  EXPECT_EQ(e.p99, 0.0);
  EXPECT_EQ(e.max, 0.0);
}

TEST(FctError, MatchedById) {
  const std::vector<FlowRecord> base = {record(0, 0, 1), record(1, 0, 2)};
  const std::vector<FlowRecord> cand = {record(1, 0, 2.2), record(0, 0, 1)};
  const auto e = fct_error(cand, base);
  EXPECT_NEAR(e.max, 10.0, 1e-9);
  EXPECT_NEAR(e.mean, 5.0, 1e-9);
  const std::vector<FlowRecord> other = {record(0, 0, 1), record(7, 0, 2)};
  EXPECT_THROW(fct_error(other, base), ConfigError);
}

TEST(Jct, SpanFromFirstReleaseToLastCompletion) {
  const std::vector<FlowRecord> r = {record(0, 1.0, 3.0), record(1, 2.0, 5.0)};
  EXPECT_DOUBLE_EQ(jct(r), 4.0);
  EXPECT_DOUBLE_EQ(first_release(r), 1.0);
  EXPECT_DOUBLE_EQ(relative_error_percent(4.4, 4.0), 10.000000000000009);
  EXPECT_DOUBLE_EQ(relative_error_percent(0.0, 0.0), 0.0);
}

TEST(Speedup, BaselineOverCandidate) {
  EXPECT_DOUBLE_EQ(speedup(20.0, 100.0), 5.0);
  EXPECT_THROW(speedup(0.0, 1.0), ConfigError);
}

TEST(Throughput, InterpolatesTheCounter) {
  LinkCounterTrace t;
  t.record(0.0, {0.0, 0.0});
  t.record(1.0, {100.0, 0.0});
  t.record(2.0, {100.0, 50.0});
  const auto s = throughput(t, 0, 0.0, 2.0, 0.5);
  ASSERT_EQ(s.bps.size(), 4U);
  EXPECT_DOUBLE_EQ(s.bps[0], 100.0);
  EXPECT_DOUBLE_EQ(s.bps[3], 0.0);
  EXPECT_DOUBLE_EQ(s.mean_bps, 50.0);
  EXPECT_EQ(busiest_link(t), 0U);
  EXPECT_DOUBLE_EQ(throughput(t, 1, 0.0, 1.0, 1.0).mean_bps, 0.0);
}

TEST(Throughput, SingleFlowFillsItsLink) {
  const auto b = testing::shared_bottleneck(1, 1'000'000'000);
  const auto r = run_pure(b.topology, b.schedule, SimMode::PLS, HybridOptions{});
  const LinkId link = busiest_link(r.link_trace);
  const auto& f = r.records.at(0);
  const auto s = throughput(r.link_trace, link, f.start_s, f.completion_s, 1e-4);
  EXPECT_NEAR(s.mean_bps, 200e9, 0.05 * 200e9);
}

TEST(FlowsCsv, ShortestRoundTripNumbers) {
  FlowRecord r = record(3, 0.1, 0.30000000000000004);
  r.src = 1;
  r.dst = 2;
  r.size_bits = 8000;
  r.mode = SimMode::FLS;
  std::ostringstream out;
  write_flows_csv(out, std::vector<FlowRecord>{r});
  EXPECT_EQ(out.str(), "id,src,dst,size_bits,release_s,completion_s,mode\n3,1,2,8000,0.1,0.30000000000000004,fls\n");
}

TEST(SimMode, StringRoundTrip) {
  for (auto m : {SimMode::PLS, SimMode::FLS, SimMode::HYBRID}) EXPECT_EQ(sim_mode_from_string(to_string(m)), m);
  EXPECT_THROW(sim_mode_from_string("packet"), ConfigError);
}

}  // namespace
}  // namespace gransim
