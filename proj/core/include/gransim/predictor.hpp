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
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gransim/core_model.hpp"

namespace gransim {

/// Base for every weight-file rejection.
class WeightFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VersionError : public WeightFileError {
 public:
  using WeightFileError::WeightFileError;
};

/// Message names the offending tensor.
class ShapeError : public WeightFileError {
 public:
  using WeightFileError::WeightFileError;
};

/// Checksum mismatch, or a file too damaged to parse.
class ChecksumError : public WeightFileError {
 public:
  using WeightFileError::WeightFileError;
};

/// Non-finite value during inference.
class PredictorError : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

inline constexpr int kWeightSchemaVersion = 1;

struct Tensor {
  std::vector<std::size_t> shape;
  /// Row-major.
  std::vector<double> data;
};

/// Single-layer, single-head post-LN encoder with a linear head on the last
/// position.
///
///   x_t   = (a_t - mean) / scale
///   X     = x embed_w + embed_b + PE
///   H     = LN1(X + softmax(X W_q (X W_k)^T / sqrt(d)) X W_v W_o)
///   Z     = LN2(H + relu(H ff1_w + ff1_b) ff2_w + ff2_b)
///   a_hat = (Z_last head_w + head_b) * scale + mean
struct AttentionWeights {
  int schema_version = kWeightSchemaVersion;
  std::size_t d_model = 32;
  std::size_t seq_len_max = 64;
  std::size_t d_ff = 64;
  /// "sinusoidal" or "none".
  std::string positional_encoding = "sinusoidal";
  double norm_mean = 0.0;
  double norm_scale = 1.0;
  std::map<std::string, Tensor> tensors;

  /// Fixed order used by the checksum payload.
  static const std::vector<std::string>& tensor_names();
  std::vector<std::size_t> expected_shape(const std::string& name) const;
  /// Throws ShapeError on a missing, unknown, misshapen or non-finite tensor.
  void validate() const;

  /// Small random weights for tests and benchmarks.
  static AttentionWeights random(std::size_t d_model, std::size_t seq_len_max, std::size_t d_ff,
                                 std::uint64_t seed);
};

/// zlib crc32 of the canonical little-endian payload.
std::uint32_t weights_checksum(const AttentionWeights& weights);

AttentionWeights load_weights(const std::filesystem::path& path);
AttentionWeights weights_from_json(const std::string& text);
void save_weights(const AttentionWeights& weights, const std::filesystem::path& path);
std::string weights_to_json(const AttentionWeights& weights);

/// softmax(Q K^T / sqrt(d_k)) V with d_k = Q.cols().
Eigen::MatrixXd scaled_dot_product_attention(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k,
                                             const Eigen::MatrixXd& v);
/// rows x d sinusoidal table; sin on even columns, cos on odd.
Eigen::MatrixXd sinusoidal_encoding(std::size_t rows, std::size_t d_model);

/// Mean of the last window_len samples. Throws ConfigError on an empty trace.
double predict_persistence(std::span<const double> trace, std::size_t window_len);

/// Tail-truncates to seq_len_max. Throws PredictorError on non-finite values.
double predict_attention(std::span<const double> trace, const AttentionWeights& weights);
/// Same, returning the head output in normalized units.
double predict_attention_normalized(std::span<const double> trace, const AttentionWeights& weights);

/// Queue-depth forecaster used when packet simulation resumes.
class QueuePredictor {
 public:
  virtual ~QueuePredictor() = default;
  virtual double predict(std::span<const double> trace) const = 0;
  virtual std::string name() const = 0;
};

class PersistencePredictor final : public QueuePredictor {
 public:
  explicit PersistencePredictor(std::size_t window_len) : window_len_(window_len) {}
  double predict(std::span<const double> trace) const override { return predict_persistence(trace, window_len_); }
  std::string name() const override { return "persistence"; }

 private:
  std::size_t window_len_;
};

class AttentionPredictor final : public QueuePredictor {
 public:
  explicit AttentionPredictor(AttentionWeights weights);
  double predict(std::span<const double> trace) const override { return predict_attention(trace, weights_); }
  std::string name() const override { return "attention"; }
  const AttentionWeights& weights() const { return weights_; }

 private:
  AttentionWeights weights_;
};

}  // namespace gransim
