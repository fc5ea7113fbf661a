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

#include "gransim/predictor.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <zlib.h>

namespace gransim {

namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffU));
}

void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffU));
}

Eigen::Map<const Matrix> as_matrix(const Tensor& t) {
  const auto rows = static_cast<Eigen::Index>(t.shape.at(0));
  const auto cols = static_cast<Eigen::Index>(t.shape.size() > 1 ? t.shape[1] : 1);
  return Eigen::Map<const Matrix>(t.data.data(), rows, cols);
}

Eigen::Map<const Eigen::RowVectorXd> as_row(const Tensor& t) {
  return Eigen::Map<const Eigen::RowVectorXd>(t.data.data(), static_cast<Eigen::Index>(t.data.size()));
}

Matrix layer_norm(const Matrix& x, const Tensor& gamma, const Tensor& beta) {
  constexpr double kEps = 1e-5;
  Matrix out(x.rows(), x.cols());
  const auto g = as_row(gamma);
  const auto b = as_row(beta);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    out.row(r) = ((x.row(r).array() - mean) / std::sqrt(var + kEps)).matrix().cwiseProduct(g) + b;
  }
  return out;
}

void check_finite(const Matrix& m, const char* stage) {
  if (!m.allFinite()) throw PredictorError(std::string("non-finite value after ") + stage);
}

}  // namespace

const std::vector<std::string>& AttentionWeights::tensor_names() {
  static const std::vector<std::string> names = {
      "embed_w", "embed_b", "w_q",   "w_k",       "w_v",      "w_o",       "ln1_gamma", "ln1_beta",
      "ff1_w",   "ff1_b",   "ff2_w", "ff2_b",     "ln2_gamma", "ln2_beta", "head_w",    "head_b"};
  return names;
}

std::vector<std::size_t> AttentionWeights::expected_shape(const std::string& name) const {
  const std::size_t d = d_model;
  if (name == "embed_w") return {1, d};
  if (name == "w_q" || name == "w_k" || name == "w_v" || name == "w_o") return {d, d};
  if (name == "ff1_w") return {d, d_ff};
  if (name == "ff1_b") return {d_ff};
  if (name == "ff2_w") return {d_ff, d};
  if (name == "head_w") return {d, 1};
  if (name == "head_b") return {1};
  if (name == "embed_b" || name == "ln1_gamma" || name == "ln1_beta" || name == "ff2_b" || name == "ln2_gamma" ||
      name == "ln2_beta") {
    return {d};
  }
  throw ShapeError("unknown tensor '" + name + "'");
}

void AttentionWeights::validate() const {
  if (d_model == 0 || seq_len_max == 0 || d_ff == 0) throw ShapeError("d_model, seq_len_max and d_ff must be >= 1");
  if (positional_encoding != "sinusoidal" && positional_encoding != "none") {
    throw ShapeError("positional_encoding must be 'sinusoidal' or 'none'");
  }
  if (!std::isfinite(norm_mean) || !(norm_scale > 0.0) || !std::isfinite(norm_scale)) {
    throw ShapeError("norm: mean must be finite and scale positive");
  }
  for (const auto& [name, t] : tensors) {
    const auto want = expected_shape(name);
    if (t.shape != want) {
      std::ostringstream msg;
      msg << "tensor '" << name << "' has shape [";
      for (std::size_t i = 0; i < t.shape.size(); ++i) msg << (i ? "," : "") << t.shape[i];
      msg << "], expected [";
      for (std::size_t i = 0; i < want.size(); ++i) msg << (i ? "," : "") << want[i];
      msg << "]";
      throw ShapeError(msg.str());
    }
    const std::size_t n = std::accumulate(want.begin(), want.end(), std::size_t{1}, std::multiplies<>());
    if (t.data.size() != n) {
      throw ShapeError("tensor '" + name + "' holds " + std::to_string(t.data.size()) + " values, expected " +
                       std::to_string(n));
    }
    for (double v : t.data) {
      if (!std::isfinite(v)) throw ShapeError("tensor '" + name + "' contains a non-finite value");
    }
  }
  for (const auto& name : tensor_names()) {
    if (!tensors.count(name)) throw ShapeError("missing tensor '" + name + "'");
  }
}

AttentionWeights AttentionWeights::random(std::size_t d_model, std::size_t seq_len_max, std::size_t d_ff,
                                          std::uint64_t seed) {
  AttentionWeights w;
  w.d_model = d_model;
  w.seq_len_max = seq_len_max;
  w.d_ff = d_ff;
  std::mt19937_64 rng(seed);
  for (const auto& name : tensor_names()) {
    Tensor t;
    t.shape = w.expected_shape(name);
    const std::size_t n = std::accumulate(t.shape.begin(), t.shape.end(), std::size_t{1}, std::multiplies<>());
    const double fan_in = static_cast<double>(t.shape.size() > 1 ? t.shape[0] : 1);
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(fan_in));
    t.data.resize(n);
    if (name == "ln1_gamma" || name == "ln2_gamma") {
      std::fill(t.data.begin(), t.data.end(), 1.0);
    } else if (name.ends_with("_b") || name.ends_with("_beta")) {
      std::fill(t.data.begin(), t.data.end(), 0.0);
    } else {
      for (double& v : t.data) v = dist(rng);
    }
    w.tensors.emplace(name, std::move(t));
  }
  return w;
}

std::uint32_t weights_checksum(const AttentionWeights& w) {
  std::string payload;
  put_u32(payload, static_cast<std::uint32_t>(w.schema_version));
  put_u32(payload, static_cast<std::uint32_t>(w.d_model));
  put_u32(payload, static_cast<std::uint32_t>(w.seq_len_max));
  put_u32(payload, static_cast<std::uint32_t>(w.d_ff));
  put_f64(payload, w.norm_mean);
  put_f64(payload, w.norm_scale);
  put_u32(payload, w.positional_encoding == "sinusoidal" ? 1U : 0U);
  for (const auto& name : AttentionWeights::tensor_names()) {
    auto it = w.tensors.find(name);
    if (it == w.tensors.end()) continue;
    put_u32(payload, static_cast<std::uint32_t>(name.size()));
    payload += name;
    put_u32(payload, static_cast<std::uint32_t>(it->second.shape.size()));
    for (std::size_t dim : it->second.shape) put_u32(payload, static_cast<std::uint32_t>(dim));
    for (double v : it->second.data) put_f64(payload, v);
  }
  const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size()));
  return static_cast<std::uint32_t>(crc);
}

std::string weights_to_json(const AttentionWeights& w) {
  nlohmann::json tensors = nlohmann::json::object();
  for (const auto& [name, t] : w.tensors) tensors[name] = {{"shape", t.shape}, {"data", t.data}};
  nlohmann::json doc = {{"schema_version", w.schema_version},
                        {"d_model", w.d_model},
                        {"seq_len_max", w.seq_len_max},
                        {"d_ff", w.d_ff},
                        {"positional_encoding", w.positional_encoding},
                        {"norm", {{"mean", w.norm_mean}, {"scale", w.norm_scale}}},
                        {"tensors", std::move(tensors)},
                        {"crc32", weights_checksum(w)}};
  return doc.dump();
}

AttentionWeights weights_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ChecksumError(std::string("weight file is truncated or corrupt: ") + e.what());
  }
  if (!doc.is_object()) throw ChecksumError("weight file is not a JSON object");

  AttentionWeights w;
  try {
    w.schema_version = doc.at("schema_version").get<int>();
    if (w.schema_version != kWeightSchemaVersion) {
      throw VersionError("unsupported weight schema_version " + std::to_string(w.schema_version) + " (expected " +
                         std::to_string(kWeightSchemaVersion) + ")");
    }
    w.d_model = doc.at("d_model").get<std::size_t>();
    w.seq_len_max = doc.at("seq_len_max").get<std::size_t>();
    w.d_ff = doc.value("d_ff", std::size_t{64});
    w.positional_encoding = doc.value("positional_encoding", std::string("sinusoidal"));
    w.norm_mean = doc.at("norm").at("mean").get<double>();
    w.norm_scale = doc.at("norm").at("scale").get<double>();
    for (const auto& [name, t] : doc.at("tensors").items()) {
      Tensor tensor;
      tensor.shape = t.at("shape").get<std::vector<std::size_t>>();
      tensor.data = t.at("data").get<std::vector<double>>();
      w.tensors.emplace(name, std::move(tensor));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ShapeError(std::string("malformed weight file: ") + e.what());
  }
  w.validate();

  const auto stored = doc.contains("crc32") ? doc["crc32"].get<std::uint32_t>() : 0U;
  const auto actual = weights_checksum(w);
  if (stored != actual) {
    throw ChecksumError("weight checksum mismatch: file says " + std::to_string(stored) + ", payload gives " +
                        std::to_string(actual));
  }
  return w;
}

AttentionWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WeightFileError("cannot open weight file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return weights_from_json(buf.str());
}

void save_weights(const AttentionWeights& weights, const std::filesystem::path& path) {
  weights.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw WeightFileError("cannot write weight file " + path.string());
  out << weights_to_json(weights) << '\n';
}

Eigen::MatrixXd scaled_dot_product_attention(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k,
                                             const Eigen::MatrixXd& v) {
  Eigen::MatrixXd scores = q * k.transpose() / std::sqrt(static_cast<double>(q.cols()));
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    const double m = scores.row(r).maxCoeff();
    scores.row(r) = (scores.row(r).array() - m).exp().matrix();
    scores.row(r) /= scores.row(r).sum();
  }
  return scores * v;
}

Eigen::MatrixXd sinusoidal_encoding(std::size_t rows, std::size_t d_model) {
  Eigen::MatrixXd pe(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d_model));
  for (std::size_t t = 0; t < rows; ++t) {
    for (std::size_t i = 0; i < d_model; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(d_model));
      const double angle = static_cast<double>(t) * freq;
      pe(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

double predict_persistence(std::span<const double> trace, std::size_t window_len) {
  if (trace.empty()) throw ConfigError("persistence prediction needs at least one sample");
  const std::size_t n = std::min(std::max<std::size_t>(window_len, 1), trace.size());
  double sum = 0.0;
  for (std::size_t i = trace.size() - n; i < trace.size(); ++i) sum += trace[i];
  return sum / static_cast<double>(n);
}

double predict_attention_normalized(std::span<const double> trace, const AttentionWeights& w) {
  if (trace.empty()) throw ConfigError("attention prediction needs at least one sample");
  const std::size_t T = std::min(trace.size(), w.seq_len_max);
  const auto tail = trace.subspan(trace.size() - T);

  Eigen::VectorXd x(static_cast<Eigen::Index>(T));
  for (std::size_t t = 0; t < T; ++t) x(static_cast<Eigen::Index>(t)) = (tail[t] - w.norm_mean) / w.norm_scale;
  if (!x.allFinite()) throw PredictorError("non-finite value in the input trace");

  Matrix X = x * as_matrix(w.tensors.at("embed_w"));
  X.rowwise() += as_row(w.tensors.at("embed_b"));
  if (w.positional_encoding == "sinusoidal") X += sinusoidal_encoding(T, w.d_model);

  const Eigen::MatrixXd q = X * as_matrix(w.tensors.at("w_q"));
  const Eigen::MatrixXd k = X * as_matrix(w.tensors.at("w_k"));
  const Eigen::MatrixXd v = X * as_matrix(w.tensors.at("w_v"));
  const Matrix attn = scaled_dot_product_attention(q, k, v) * as_matrix(w.tensors.at("w_o"));
  check_finite(attn, "attention");

  const Matrix h = layer_norm(X + attn, w.tensors.at("ln1_gamma"), w.tensors.at("ln1_beta"));
  Matrix ff = h * as_matrix(w.tensors.at("ff1_w"));
  ff.rowwise() += as_row(w.tensors.at("ff1_b"));
  ff = ff.cwiseMax(0.0);
  Matrix ff_out = ff * as_matrix(w.tensors.at("ff2_w"));
  ff_out.rowwise() += as_row(w.tensors.at("ff2_b"));
  const Matrix z = layer_norm(h + ff_out, w.tensors.at("ln2_gamma"), w.tensors.at("ln2_beta"));
  check_finite(z, "feed-forward");

  const double y = (z.row(static_cast<Eigen::Index>(T) - 1) * as_matrix(w.tensors.at("head_w")))(0, 0) +
                   w.tensors.at("head_b").data[0];
  if (!std::isfinite(y)) throw PredictorError("non-finite prediction");
  return y;
}

double predict_attention(std::span<const double> trace, const AttentionWeights& weights) {
  return predict_attention_normalized(trace, weights) * weights.norm_scale + weights.norm_mean;
}

AttentionPredictor::AttentionPredictor(AttentionWeights weights) : weights_(std::move(weights)) {
  weights_.validate();
}

}  // namespace gransim
