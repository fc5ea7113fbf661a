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

#include <random>

#include "gransim/control.hpp"

namespace gransim {
namespace {

constexpr double kGbps = 1e9;
constexpr double kKB = 8'000.0;

TEST(BandwidthStability, SmallSpreadIsStable) {
  const std::vector<double> s = {10.0 * kGbps, 10.2 * kGbps, 9.9 * kGbps};
  const auto r = check_bandwidth_stability(s, 0.5 * kGbps);
  EXPECT_TRUE(r.stable);
  EXPECT_NEAR(r.variation, 0.3 * kGbps, 1e-3);
}

TEST(BandwidthStability, LargeSpreadIsUnstable) {
  const std::vector<double> s = {5 * kGbps, 9 * kGbps};
  const auto r = check_bandwidth_stability(s, 0.5 * kGbps);
  EXPECT_FALSE(r.stable);
  EXPECT_DOUBLE_EQ(r.variation, 4 * kGbps);
}

TEST(BandwidthStability, ConstantAndShortWindows) {
  const std::vector<double> c(6, 42.0);
  EXPECT_TRUE(check_bandwidth_stability(c, 1e-9).stable);
  EXPECT_DOUBLE_EQ(check_bandwidth_stability(c, 1e-9).variation, 0.0);
  const std::vector<double> one = {1.0};
  EXPECT_FALSE(check_bandwidth_stability(one, 10.0).stable);
  EXPECT_FALSE(check_bandwidth_stability({}, 10.0).stable);
}

TEST(QueueStability, Examples) {
  const std::vector<double> a = {10 * kKB, 12 * kKB, 11 * kKB};
  EXPECT_TRUE(check_queue_stability(a, 4 * kKB).stable);
  const std::vector<double> b = {0.0, 40 * kKB};
  EXPECT_FALSE(check_queue_stability(b, 4 * kKB).stable);
  const std::vector<double> z(10, 0.0);
  EXPECT_TRUE(check_queue_stability(z, 4 * kKB).stable);
}

ControlConfig monitor_config() {
  ControlConfig c;
  c.eps_bw_bps = 1 * kGbps;
  c.eps_q_bits = 4 * kKB;
  c.window_len = 4;
  c.n_stable = 3;
  return c;
}

const std::vector<FlowId> kFlows = {0, 1};

bool observe(StabilityMonitor& m, double r0, double r1, double q) {
  return m.observe(kFlows, {r0, r1}, {{7, q}});
}

TEST(StabilityMonitor, FlagRaisedOnThirdStableRound) {
  StabilityMonitor m(monitor_config());
  // A one-sample window cannot show stability yet.
  EXPECT_FALSE(observe(m, 50 * kGbps, 50 * kGbps, 0));
  EXPECT_FALSE(m.last_round_stable());
  EXPECT_FALSE(observe(m, 50 * kGbps, 50 * kGbps, 0));
  EXPECT_EQ(m.stable_rounds(), 1U);
  EXPECT_FALSE(observe(m, 50 * kGbps, 50 * kGbps, 0));
  EXPECT_EQ(m.stable_rounds(), 2U);
  EXPECT_TRUE(observe(m, 50 * kGbps, 50 * kGbps, 0));
  EXPECT_EQ(m.stable_rounds(), 3U);
  m.reset_counter();
  EXPECT_FALSE(m.flag());
}

TEST(StabilityMonitor, BurstResetsTheCounter) {
  StabilityMonitor m(monitor_config());
  observe(m, 50 * kGbps, 50 * kGbps, 0);
  EXPECT_FALSE(observe(m, 50 * kGbps, 50 * kGbps, 0));
  EXPECT_FALSE(observe(m, 50 * kGbps, 50 * kGbps, 0));
  EXPECT_EQ(m.stable_rounds(), 2U);
  EXPECT_FALSE(observe(m, 80 * kGbps, 50 * kGbps, 0));
  EXPECT_EQ(m.stable_rounds(), 0U);
  EXPECT_FALSE(observe(m, 50 * kGbps, 50 * kGbps, 0));
  EXPECT_FALSE(m.flag());
}

TEST(StabilityMonitor, OscillatingPortBlocksTheSwitch) {
  StabilityMonitor m(monitor_config());
  for (int round = 0; round < 10; ++round) {
    EXPECT_FALSE(observe(m, 50 * kGbps, 50 * kGbps, round % 2 ? 40 * kKB : 0.0));
  }
  EXPECT_EQ(m.stable_rounds(), 0U);
}

TEST(StabilityMonitor, DepartedFlowsLoseTheirWindow) {
  StabilityMonitor m(monitor_config());
  observe(m, 10 * kGbps, 90 * kGbps, 0);
  observe(m, 10 * kGbps, 90 * kGbps, 0);
  EXPECT_EQ(m.flow_window(1).size(), 2U);
  m.observe({0}, {10 * kGbps}, {{7, 0.0}});
  EXPECT_THROW(m.flow_window(1), std::out_of_range);
  EXPECT_EQ(m.flow_window(0).size(), 3U);
  EXPECT_THROW(m.observe({0}, {}, {}), ConfigError);
}

TEST(StabilityMonitor, WindowsAreBounded) {
  StabilityMonitor m(monitor_config());
  for (int i = 0; i < 20; ++i) observe(m, i * kGbps, 0, i * 1.0);
  EXPECT_EQ(m.flow_window(0).size(), 4U);
  EXPECT_EQ(m.port_window(7).size(), 4U);
  EXPECT_DOUBLE_EQ(m.flow_window(0).back(), 19 * kGbps);
}

TEST(StabilityMonitor, NoActiveFlowsIsNeverStable) {
  StabilityMonitor m(monitor_config());
  for (int i = 0; i < 5; ++i) EXPECT_FALSE(m.observe({}, {}, {{7, 0.0}}));
}

struct Round {
  std::vector<double> rates;
  double depth;
};

// Round index at which the flag first rises, or -1.
int first_flag(const std::vector<Round>& history, ControlConfig c) {
  StabilityMonitor m(c);
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (m.observe({0, 1, 2}, history[i].rates, {{3, history[i].depth}, {9, history[i].depth / 2}})) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

TEST(StabilityMonitor, LargerThresholdsNeverDelayTheSwitch) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  int raised = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Round> history;
    const double base = 40 * kGbps;
    const double spread = (1 + rng() % 8) * 0.5 * kGbps;
    for (int r = 0; r < 40; ++r) {
      Round round;
      for (int f = 0; f < 3; ++f) round.rates.push_back(base + spread * jitter(rng));
      round.depth = 100 * kKB + (1 + rng() % 4) * kKB * jitter(rng);
      history.push_back(round);
    }
    ControlConfig small = monitor_config();
    small.eps_bw_bps = (1 + rng() % 10) * 0.5 * kGbps;
    small.eps_q_bits = (1 + rng() % 6) * kKB;
    ControlConfig large = small;
    large.eps_bw_bps *= 1.0 + static_cast<double>(rng() % 100) / 50.0;
    large.eps_q_bits *= 1.0 + static_cast<double>(rng() % 100) / 50.0;

    const int at_small = first_flag(history, small);
    const int at_large = first_flag(history, large);
    if (at_small >= 0) {
      ++raised;
      ASSERT_GE(at_large, 0) << "trial " << trial;
      EXPECT_LE(at_large, at_small) << "trial " << trial;
    }
    EXPECT_EQ(first_flag(history, small), at_small) << "replay differs, trial " << trial;
  }
  // The generator must exercise both outcomes.
  EXPECT_GT(raised, 50);
  EXPECT_LT(raised, 1000);
}

SteadyPhasePlan plan_at(double t_start, double tau) {
  SteadyPhasePlan p;
  p.t_start = t_start;
  p.tau_steady = tau;
  p.t_end = t_start + tau;
  return p;
}

TEST(FlowToPacket, FlowFinishEndsThePhase) {
  const auto d = schedule_flow_to_packet(plan_at(10e-3, 2e-3), kInfinity, ControlConfig{});
  EXPECT_FALSE(d.veto);
  EXPECT_DOUBLE_EQ(d.t_end, 12e-3);
  EXPECT_EQ(to_string(d.reason), "flow_finish");
}

TEST(FlowToPacket, ArrivalTruncatesThePhase) {
  ControlConfig c;
  c.min_steady_s = 100e-6;
  const auto d = schedule_flow_to_packet(plan_at(10e-3, 2e-3), 10.5e-3, c);
  EXPECT_FALSE(d.veto);
  EXPECT_DOUBLE_EQ(d.t_end, 10.5e-3);
  EXPECT_EQ(d.reason, PhaseEndReason::NewArrival);
}

TEST(FlowToPacket, CapAndVeto) {
  ControlConfig c;
  c.max_steady_s = 1e-3;
  const auto capped = schedule_flow_to_packet(plan_at(0.0, 5e-3), kInfinity, c);
  EXPECT_DOUBLE_EQ(capped.t_end, 1e-3);
  EXPECT_EQ(capped.reason, PhaseEndReason::Cap);
  const auto short_phase = schedule_flow_to_packet(plan_at(0.0, 100e-6), kInfinity, ControlConfig{});
  EXPECT_TRUE(short_phase.veto);
}

TEST(ControlConfig, DefaultsAndValidation) {
  const auto c = ControlConfig::defaults_for(200e9);
  EXPECT_DOUBLE_EQ(c.eps_bw_bps, 4e9);
  EXPECT_DOUBLE_EQ(c.eps_q_bits, 16 * kKB);
  EXPECT_EQ(c.window_len, 10U);
  EXPECT_DOUBLE_EQ(c.sample_interval_s, 50e-6);
  EXPECT_EQ(c.n_stable, 3U);
  EXPECT_DOUBLE_EQ(c.min_steady_s, 10 * c.sample_interval_s);
  EXPECT_DOUBLE_EQ(c.max_steady_s, 100e-3);
  EXPECT_NO_THROW(c.validate());
  ControlConfig bad = c;
  bad.window_len = 1;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.min_steady_s = 1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.n_stable = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

}  // namespace
}  // namespace gransim
