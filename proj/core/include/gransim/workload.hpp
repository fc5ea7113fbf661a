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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gransim/core_model.hpp"

namespace gransim {

/// Sizing inputs for LLM-training communication. Defaults follow a GPT-3
/// class dense model (hidden 12288, context 2048).
struct ModelSpec {
  std::uint64_t n_params = 175'000'000'000ULL;
  std::uint64_t hidden_dim = 12288;
  std::uint64_t n_layers = 96;
  std::uint64_t seq_len = 2048;
  std::uint64_t micro_batch = 1;
  std::uint64_t bytes_per_elem = 2;

  void validate() const;
  /// micro_batch * seq_len * hidden_dim * bytes_per_elem, in bits.
  Bits activation_bits() const;
  /// n_params * bytes_per_elem, in bits.
  Bits gradient_bits() const;
};

enum class Strategy : std::uint8_t { PP, TP, DP, EP, Mixed };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

struct ParallelismSpec {
  Strategy strategy = Strategy::PP;
  std::size_t pp_stages = 1;
  std::size_t tp_degree = 1;
  std::size_t dp_degree = 1;
  std::size_t ep_degree = 1;
  std::size_t n_microbatches = 1;
  std::size_t n_iterations = 1;

  void validate() const;
};

/// Knobs that are not model hyperparameters.
struct WorkloadOptions {
  /// Release offset between consecutive training iterations.
  double iteration_gap_s = 0.0;
  /// Release spacing between consecutive tensor-parallel all-reduces.
  double tp_gap_s = 0.0;
  /// Replaces ModelSpec::activation_bits() for PP/TP/EP flows.
  std::optional<Bits> activation_bits;
  /// Replaces ModelSpec::gradient_bits() for DP all-reduces.
  std::optional<Bits> gradient_bits;
  /// Per-pair chunk of an expert-parallel all-to-all; defaults to activation / ep_degree.
  std::optional<Bits> ep_chunk_bits;
};

/// Rank -> host map. Rank order is also ring order.
using Placement = std::vector<HostId>;

Placement linear_placement(std::size_t ranks);
/// Round-robin over leaves so consecutive ranks land on different leaves.
Placement strided_placement(std::size_t ranks, const Topology& topology);

FlowSchedule gen_pp(const ModelSpec& model, const ParallelismSpec& par, const Placement& placement,
                    const WorkloadOptions& options = {});
FlowSchedule gen_dp(const ModelSpec& model, const ParallelismSpec& par, const Placement& placement,
                    const WorkloadOptions& options = {});
FlowSchedule gen_tp(const ModelSpec& model, const ParallelismSpec& par, const Placement& placement,
                    const WorkloadOptions& options = {});
FlowSchedule gen_ep_all_to_all(const ParallelismSpec& par, Bits chunk_bits, const Placement& placement,
                               double release_s = 0.0);
FlowSchedule gen_mixed(const ModelSpec& model, const ParallelismSpec& par, const Placement& placement,
                       const WorkloadOptions& options = {});

/// Dispatches on par.strategy.
FlowSchedule generate(const ModelSpec& model, const ParallelismSpec& par, const Placement& placement,
                      const WorkloadOptions& options = {});

/// Appends `other` to `base`, renumbering ids and dependency edges.
void append_schedule(FlowSchedule& base, const FlowSchedule& other);

/// One JSON object per line: id, src, dst, size_bits, release_s, deps, weight
/// (and min_bandwidth_bps when finite).
void write_schedule_jsonl(std::ostream& out, const FlowSchedule& schedule);
FlowSchedule read_schedule_jsonl(std::istream& in);

}  // namespace gransim
