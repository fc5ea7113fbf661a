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

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gransim/predictor.hpp"

namespace gransim {
namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

const std::filesystem::path kData = GRANSIM_TEST_DATA_DIR;

TEST(Persistence, MeanOfTheWindow) {
  const std::vector<double> kb = {99'000.0, 80'000.0, 160'000.0};
  EXPECT_DOUBLE_EQ(predict_persistence(kb, 2), 120'000.0);
  const std::vector<double> one = {7.0};
  EXPECT_DOUBLE_EQ(predict_persistence(one, 10), 7.0);
  const std::vector<double> flat(50, 3.25);
  EXPECT_DOUBLE_EQ(predict_persistence(flat, 10), 3.25);
  EXPECT_THROW(predict_persistence({}, 10), ConfigError);
}

TEST(Attention, EqualScoresAverageTheValues) {
  Eigen::MatrixXd q = Eigen::MatrixXd::Constant(4, 3, 0.7);
  Eigen::MatrixXd v(4, 2);
  v << 1, 2, 3, 4, 5, 6, 7, 8;
  const auto out = scaled_dot_product_attention(q, q, v);
  for (int r = 0; r < 4; ++r) {
    EXPECT_NEAR(out(r, 0), 4.0, 1e-12);
    EXPECT_NEAR(out(r, 1), 5.0, 1e-12);
  }
}

TEST(Attention, MatchesAHandComputedReference) {
  Eigen::MatrixXd q(2, 2), k(2, 2), v(2, 2);
  q << 1, 0, 0, 1;
  k << 1, 0, 0, 2;
  v << 10, 0, 0, 10;
  const auto out = scaled_dot_product_attention(q, k, v);
  const double s = 1.0 / std::sqrt(2.0);
  // Row 0 scores {s, 0}; row 1 scores {0, 2s}.
  const double w00 = std::exp(s) / (std::exp(s) + 1.0);
  const double w11 = std::exp(2 * s) / (1.0 + std::exp(2 * s));
  EXPECT_NEAR(out(0, 0), 10 * w00, 1e-12);
  EXPECT_NEAR(out(0, 1), 10 * (1 - w00), 1e-12);
  EXPECT_NEAR(out(1, 0), 10 * (1 - w11), 1e-12);
  EXPECT_NEAR(out(1, 1), 10 * w11, 1e-12);
}

TEST(Attention, RowsStayInsideTheValueHull) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd q(5, 4), k(5, 4), v(5, 3);
    for (auto* m : {&q, &k, &v}) {
      for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = n(rng);
    }
    const auto out = scaled_dot_product_attention(q, k, v);
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      for (Eigen::Index r = 0; r < out.rows(); ++r) {
        EXPECT_GE(out(r, c), v.col(c).minCoeff() - 1e-12);
        EXPECT_LE(out(r, c), v.col(c).maxCoeff() + 1e-12);
      }
    }
  }
}

TEST(Attention, SinusoidalTable) {
  const auto pe = sinusoidal_encoding(3, 4);
  EXPECT_DOUBLE_EQ(pe(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(pe(0, 1), 1.0);
  EXPECT_NEAR(pe(2, 0), std::sin(2.0), 1e-15);
  EXPECT_NEAR(pe(2, 3), std::cos(2.0 * 0.01), 1e-15);
}

TEST(Attention, ParityWithReferenceImplementation) {
  const auto doc = nlohmann::json::parse(read_file(kData / "parity_fixtures.json"));
  const auto w = load_weights(kData / doc.at("weights").get<std::string>());
  const double tol = doc.at("tolerance").get<double>();
  ASSERT_EQ(doc.at("fixtures").size(), 10U);
  for (const auto& f : doc.at("fixtures")) {
    const auto trace = f.at("trace").get<std::vector<double>>();
    EXPECT_NEAR(predict_attention_normalized(trace, w), f.at("expected_normalized").get<double>(), tol)
        << trace.size() << " samples";
  }
}

TEST(Attention, DeterministicAndOrderAware) {
  const auto w = AttentionWeights::random(8, 16, 12, 5);
  std::vector<double> trace;
  for (int i = 0; i < 12; ++i) trace.push_back(1000.0 * i);
  const double a = predict_attention(trace, w);
  EXPECT_EQ(a, predict_attention(trace, w));
  std::vector<double> reversed(trace.rbegin(), trace.rend());
  EXPECT_NE(a, predict_attention(reversed, w));
}

TEST(Attention, WithoutPositionsEarlierOrderIsIrrelevant) {
  auto w = AttentionWeights::random(8, 16, 12, 5);
  w.positional_encoding = "none";
  const std::vector<double> a = {1.0, 5.0, 9.0, 2.0, 4.0};
  const std::vector<double> b = {9.0, 2.0, 1.0, 5.0, 4.0};
  EXPECT_NEAR(predict_attention_normalized(a, w), predict_attention_normalized(b, w), 1e-12);
}

TEST(Attention, LongTracesUseOnlyTheTail) {
  const auto w = AttentionWeights::random(8, 16, 12, 9);
  std::vector<double> trace(40);
  for (std::size_t i = 0; i < trace.size(); ++i) trace[i] = 3000.0 * static_cast<double>(i % 7);
  const std::vector<double> tail(trace.end() - 16, trace.end());
  EXPECT_EQ(predict_attention(trace, w), predict_attention(tail, w));
}

TEST(Attention, NonFiniteInputIsRejected) {
  const auto w = AttentionWeights::random(8, 16, 12, 1);
  const std::vector<double> bad = {1.0, std::numeric_limits<double>::quiet_NaN()};
  EXPECT_THROW(predict_attention(bad, w), PredictorError);
}

class WeightFile : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("gransim_weights_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  void write(const std::string& name, const std::string& text) { std::ofstream(dir_ / name) << text; }
  std::filesystem::path dir_;
};

TEST_F(WeightFile, SaveLoadIsBitExact) {
  const auto w = AttentionWeights::random(8, 16, 12, 77);
  save_weights(w, dir_ / "w.json");
  const auto back = load_weights(dir_ / "w.json");
  EXPECT_EQ(back.d_model, w.d_model);
  EXPECT_EQ(back.norm_mean, w.norm_mean);
  for (const auto& [name, t] : w.tensors) {
    EXPECT_EQ(back.tensors.at(name).shape, t.shape) << name;
    EXPECT_EQ(back.tensors.at(name).data, t.data) << name;
  }
  EXPECT_EQ(weights_checksum(back), weights_checksum(w));
}

TEST_F(WeightFile, ReferenceFileLoadsWithExpectedShapes) {
  const auto w = load_weights(kData / "parity_weights.json");
  EXPECT_EQ(w.d_model, 8U);
  EXPECT_EQ(w.tensors.at("w_q").shape, (std::vector<std::size_t>{8, 8}));
  EXPECT_EQ(w.tensors.at("ff1_w").shape, (std::vector<std::size_t>{8, 12}));
}

TEST_F(WeightFile, TruncationIsAChecksumError) {
  const std::string text = read_file(kData / "parity_weights.json");
  write("cut.json", text.substr(0, text.size() / 2));
  EXPECT_THROW(load_weights(dir_ / "cut.json"), ChecksumError);
}

TEST_F(WeightFile, FlippedValueIsAChecksumError) {
  auto doc = nlohmann::json::parse(read_file(kData / "parity_weights.json"));
  doc["tensors"]["w_v"]["data"][3] = doc["tensors"]["w_v"]["data"][3].get<double>() + 1e-9;
  write("flip.json", doc.dump());
  EXPECT_THROW(load_weights(dir_ / "flip.json"), ChecksumError);
}

TEST_F(WeightFile, ModelWidthMismatchNamesTheTensor) {
  auto doc = nlohmann::json::parse(read_file(kData / "parity_weights.json"));
  doc["d_model"] = 16;
  write("wide.json", doc.dump());
  try {
    load_weights(dir_ / "wide.json");
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("tensor 'embed_"), std::string::npos) << msg;
    EXPECT_NE(msg.find("expected [16]"), std::string::npos) << msg;
  }
}

TEST_F(WeightFile, UnknownVersionIsAVersionError) {
  auto doc = nlohmann::json::parse(read_file(kData / "parity_weights.json"));
  doc["schema_version"] = 2;
  write("v2.json", doc.dump());
  EXPECT_THROW(load_weights(dir_ / "v2.json"), VersionError);
  EXPECT_THROW(load_weights(dir_ / "absent.json"), WeightFileError);
}

}  // namespace
}  // namespace gransim
