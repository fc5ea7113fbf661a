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

#include <set>

#include "gransim/core_model.hpp"

namespace gransim {
namespace {

TEST(Topology, TwoByTwoByFourCounts) {
  const Topology t = build_leaf_spine(2, 2, 4, 200e9, 10e-6);
  EXPECT_EQ(t.host_count(), 8U);
  EXPECT_EQ(t.switches().size(), 4U);
  // 8 host-leaf pairs plus 4 leaf-spine pairs, two directed links each.
  EXPECT_EQ(t.links().size(), 2U * (8 + 4));
  EXPECT_TRUE(t.is_connected());
}

TEST(Topology, MinimalFabric) {
  const Topology t = build_leaf_spine(1, 1, 1, 200e9, 10e-6);
  EXPECT_EQ(t.host_count(), 1U);
  EXPECT_EQ(t.switches().size(), 2U);
  EXPECT_TRUE(t.is_connected());
}

TEST(Topology, EachLeafHasOneUplinkPerSpine) {
  const Topology t = build_leaf_spine(2, 1, 2, 100e9, 5e-6);
  EXPECT_EQ(t.host_count(), 4U);
  for (std::size_t leaf = 0; leaf < 2; ++leaf) {
    std::size_t uplinks = 0;
    for (const Link& l : t.links()) {
      if (l.src == t.leaf_node(leaf) && t.tier(l.dst) == Tier::Spine) ++uplinks;
    }
    EXPECT_EQ(uplinks, 1U);
  }
}

TEST(Topology, RejectsDegenerateParameters) {
  EXPECT_THROW(build_leaf_spine(0, 1, 1, 1e9, 0.0), ConfigError);
  EXPECT_THROW(build_leaf_spine(1, 0, 1, 1e9, 0.0), ConfigError);
  EXPECT_THROW(build_leaf_spine(1, 1, 0, 1e9, 0.0), ConfigError);
  EXPECT_THROW(build_leaf_spine(1, 1, 1, 0.0, 0.0), ConfigError);
  EXPECT_THROW(build_leaf_spine(1, 1, 1, 1e9, -1.0), ConfigError);
}

TEST(Topology, StructuralHashTracksStructure) {
  const auto a = build_leaf_spine(2, 2, 4, 200e9, 10e-6);
  const auto b = build_leaf_spine(2, 2, 4, 200e9, 10e-6);
  const auto c = build_leaf_spine(2, 2, 4, 100e9, 10e-6);
  EXPECT_EQ(a.structural_hash(), b.structural_hash());
  EXPECT_NE(a.structural_hash(), c.structural_hash());
}

TEST(Topology, SwitchPortsAreLinksLeavingSwitches) {
  const Topology t = build_leaf_spine(2, 2, 2, 1e9, 0.0);
  EXPECT_FALSE(t.is_switch_port(t.host_uplink(0)));
  EXPECT_TRUE(t.is_switch_port(t.host_downlink(0)));
  EXPECT_TRUE(t.is_switch_port(t.leaf_to_spine(0, 1)));
  EXPECT_TRUE(t.is_switch_port(t.spine_to_leaf(1, 0)));
}

// Independent splitmix64 for checking the ECMP key.
std::uint64_t reference_mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

TEST(Routing, EcmpHashFrozenValues) {
  EXPECT_EQ(ecmp_hash(0, 0), 0xa706dd2f4d197e6fULL);
  EXPECT_EQ(ecmp_hash(1, 0), 0x08b4fda8c892b50eULL);
  EXPECT_EQ(ecmp_hash(7, 42), 0x16062d6c1339e500ULL);
  EXPECT_EQ(ecmp_hash(123456, 1), 0x235c3a415b98ad2cULL);
  for (std::uint64_t f = 0; f < 100; ++f) {
    EXPECT_EQ(ecmp_hash(f, 9), reference_mix(reference_mix(9) ^ f));
  }
}

TEST(Routing, SameLeafPairUsesTwoLinks) {
  const Topology t = build_leaf_spine(2, 2, 4, 200e9, 10e-6);
  const Path p = route(t, 0, 3, 5, 0);
  ASSERT_EQ(p.hops(), 2U);
  EXPECT_EQ(p.links[0], t.host_uplink(0));
  EXPECT_EQ(p.links[1], t.host_downlink(3));
  EXPECT_TRUE(is_valid_path(t, p, 0, 3));
}

TEST(Routing, CrossLeafPairUsesHashedSpine) {
  const Topology t = build_leaf_spine(2, 4, 4, 200e9, 10e-6);
  for (FlowId f = 0; f < 64; ++f) {
    const Path p = route(t, 1, 6, f, 3);
    const std::size_t spine = reference_mix(reference_mix(3) ^ f) % 4;
    ASSERT_EQ(p.hops(), 4U);
    EXPECT_EQ(p.links[0], t.host_uplink(1));
    EXPECT_EQ(p.links[1], t.leaf_to_spine(0, spine));
    EXPECT_EQ(p.links[2], t.spine_to_leaf(spine, 1));
    EXPECT_EQ(p.links[3], t.host_downlink(6));
    EXPECT_TRUE(is_valid_path(t, p, 1, 6));
  }
}

TEST(Routing, DeterministicAndSpreadOverSpines) {
  const Topology t = build_leaf_spine(2, 4, 4, 200e9, 10e-6);
  std::set<LinkId> used;
  for (FlowId f = 0; f < 64; ++f) {
    EXPECT_EQ(route(t, 0, 7, f, 11), route(t, 0, 7, f, 11));
    used.insert(route(t, 0, 7, f, 11).links[1]);
  }
  EXPECT_EQ(used.size(), 4U);
}

TEST(Routing, RejectsBadEndpoints) {
  const Topology t = build_leaf_spine(1, 1, 2, 1e9, 0.0);
  EXPECT_THROW(route(t, 0, 0, 0, 0), ConfigError);
  EXPECT_THROW(route(t, 0, 9, 0, 0), ConfigError);
}

TEST(Routing, BaseLatencyIsPropagationPlusStoreAndForward) {
  const Topology t = build_leaf_spine(2, 1, 2, 200e9, 10e-6);
  const Path p = route(t, 0, 2, 0, 0);
  // 4 propagation delays and 3 serializations after the first hop.
  EXPECT_NEAR(path_base_latency(t, p, 8000), 4 * 10e-6 + 3 * 40e-9, 1e-15);
}

TEST(Schedule, ValidationCatchesBadInput) {
  auto base = [] {
    FlowSchedule s;
    s.flows.push_back(Flow{0, 0, 1, 100, 0.0, 1.0, kInfinity, {}});
    s.flows.push_back(Flow{1, 1, 0, 100, 0.0, 1.0, kInfinity, {0}});
    return s;
  };
  EXPECT_NO_THROW(validate_schedule(base(), 2));
  auto s = base();
  s.flows[1].deps = {5};
  EXPECT_THROW(validate_schedule(s, 2), ConfigError);
  s = base();
  s.flows[1].deps = {1};
  EXPECT_THROW(validate_schedule(s, 2), ConfigError);
  s = base();
  s.flows[0].deps = {1};
  EXPECT_THROW(validate_schedule(s, 2), ConfigError);
  s = base();
  s.flows[0].size_bits = 0;
  EXPECT_THROW(validate_schedule(s, 2), ConfigError);
  s = base();
  s.flows[0].dst = 7;
  EXPECT_THROW(validate_schedule(s, 2), ConfigError);
}

TEST(Schedule, TopologicalOrderAndCycles) {
  FlowSchedule s;
  s.flows.push_back(Flow{0, 0, 1, 1, 0.0, 1.0, kInfinity, {2}});
  s.flows.push_back(Flow{1, 0, 1, 1, 0.0, 1.0, kInfinity, {}});
  s.flows.push_back(Flow{2, 0, 1, 1, 0.0, 1.0, kInfinity, {1}});
  const auto order = topological_order(s);
  ASSERT_TRUE(order.has_value());
  EXPECT_EQ(*order, (std::vector<FlowId>{1, 2, 0}));
  s.flows[1].deps = {0};
  EXPECT_FALSE(topological_order(s).has_value());
  EXPECT_EQ(s.total_bits(), 3);
}

TEST(EventQueue, TiesPopInInsertionOrder) {
  EventQueue<int> q;
  q.push(2.0, 20);
  q.push(1.0, 10);
  q.push(1.0, 11);
  q.push(1.0, 12);
  EXPECT_EQ(q.next_time(), 1.0);
  EXPECT_EQ(q.pop().payload, 10);
  EXPECT_EQ(q.pop().payload, 11);
  EXPECT_EQ(q.pop().payload, 12);
  EXPECT_EQ(q.pop().payload, 20);
  EXPECT_TRUE(q.empty());
  EXPECT_EQ(q.next_time(), kInfinity);
}

TEST(EventQueue, ShiftKeepsRelativeOrder) {
  EventQueue<int> q;
  q.push(1.0, 1);
  q.push(1.0, 2);
  q.push(3.0, 3);
  q.shift_if(5.0, [](int v) { return v != 3; });
  EXPECT_EQ(q.pop().payload, 3);
  auto a = q.pop();
  auto b = q.pop();
  EXPECT_EQ(a.payload, 1);
  EXPECT_EQ(b.payload, 2);
  EXPECT_DOUBLE_EQ(a.time, 6.0);
}

}  // namespace
}  // namespace gransim
