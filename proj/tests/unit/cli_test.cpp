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
#include <sstream>

#include <nlohmann/json.hpp>

#include "gransim/scenario.hpp"
#include "gransim_cli/cli.hpp"

namespace gransim {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "gransim");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           (std::string("gransim_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    write_config(R"({
  "topology": {"leaves": 2, "spines": 1, "hosts_per_leaf": 2},
  "workload": {"strategy": "dp", "parallelism": {"dp_degree": 2}, "gradient_bits": 40000000},
  "output_dir": "out"
})");
  }
  void TearDown() override { fs::remove_all(dir_); }
  void write_config(const std::string& text) { std::ofstream(config()) << text; }
  std::string config() const { return (dir_ / "scenario.json").string(); }
  fs::path dir_;
};

TEST_F(Cli, HelpListsDefaults) {
  const auto r = run_cli({"--help"});
  EXPECT_EQ(r.code, cli::kExitOk);
  EXPECT_NE(r.out.find("link_capacity_bps"), std::string::npos);
  EXPECT_NE(r.out.find("sweep"), std::string::npos);
}

TEST_F(Cli, RunWritesOneRowPerFlow) {
  const auto r = run_cli({"run", config(), "--mode", "pls", "--out", (dir_ / "a").string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto csv = slurp(dir_ / "a" / "flows.csv");
  // A two-rank ring all-reduce: 2 (G - 1) steps of G flows.
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4 + 1);
  EXPECT_TRUE(fs::exists(dir_ / "a" / "summary.json"));
  EXPECT_FALSE(fs::exists(dir_ / "a" / "queue_traces.jsonl"));
}

TEST_F(Cli, SameSeedSameBytes) {
  ASSERT_EQ(run_cli({"run", config(), "--out", (dir_ / "a").string()}).code, 0);
  ASSERT_EQ(run_cli({"run", config(), "--out", (dir_ / "b").string()}).code, 0);
  EXPECT_EQ(slurp(dir_ / "a" / "flows.csv"), slurp(dir_ / "b" / "flows.csv"));
}

TEST_F(Cli, ExportTraces) {
  const auto r = run_cli({"run", config(), "--export-traces", "--out", (dir_ / "t").string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto text = slurp(dir_ / "t" / "queue_traces.jsonl");
  ASSERT_FALSE(text.empty());
  const auto first = nlohmann::json::parse(text.substr(0, text.find('\n')));
  EXPECT_TRUE(first.contains("port"));
  EXPECT_TRUE(first.contains("t"));
  std::istringstream in(text);
  const auto traces = read_queue_traces(in);
  ASSERT_FALSE(traces.empty());
  std::size_t rows = 0;
  for (const auto& [port, samples] : traces) {
    rows += samples.size();
    for (double d : samples) EXPECT_GE(d, 0.0);
  }
  EXPECT_EQ(rows, static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')));
  std::istringstream bad("{\"port\": 1}\n");
  EXPECT_THROW(read_queue_traces(bad), ConfigError);
}

TEST_F(Cli, ComparePacketAgainstItself) {
  const auto r = run_cli({"compare", config(), "--candidates", "pls", "--out", (dir_ / "c").string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto report = nlohmann::json::parse(slurp(dir_ / "c" / "report.json"));
  EXPECT_FALSE(report.dump().empty());
  EXPECT_NE(r.out.find("fct p99 0%"), std::string::npos) << r.out;
}

TEST_F(Cli, SweepWritesOneReportPerPoint) {
  write_config(R"({
  "topology": {"leaves": 2, "spines": 1, "hosts_per_leaf": 2},
  "workload": {"strategy": "dp", "gradient_bits": 40000000},
  "output_dir": ")" + (dir_ / "s").string() + R"("
})");
  const auto r = run_cli({"sweep", config(), "--vary", "dp_degree=2,4", "--candidates", "fls"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "s" / "point_0" / "report.json"));
  EXPECT_TRUE(fs::exists(dir_ / "s" / "point_1" / "report.json"));
  EXPECT_FALSE(fs::exists(dir_ / "s" / "point_2"));
  EXPECT_EQ(run_cli({"sweep", config(), "--vary", "dp_degree="}).code, cli::kExitConfig);
  EXPECT_EQ(run_cli({"sweep", config()}).code, cli::kExitConfig);
}

TEST_F(Cli, UnknownKeyExitsWithConfigError) {
  write_config(R"({"topology": {"spine_count": 2}})");
  const auto r = run_cli({"run", config()});
  EXPECT_EQ(r.code, cli::kExitConfig);
  EXPECT_NE(r.err.find("topology.spine_count"), std::string::npos) << r.err;
}

TEST_F(Cli, GenWorkloadAndPrintConfig) {
  const auto g = run_cli({"gen-workload", config()});
  ASSERT_EQ(g.code, cli::kExitOk) << g.err;
  EXPECT_EQ(std::count(g.out.begin(), g.out.end(), '\n'), 4);
  const auto p = run_cli({"print-config", config()});
  ASSERT_EQ(p.code, cli::kExitOk) << p.err;
  EXPECT_EQ(nlohmann::json::parse(p.out).at("topology").at("hosts_per_leaf"), 2);
  EXPECT_EQ(run_cli({"print-config"}).code, cli::kExitOk);
  EXPECT_EQ(run_cli({"frobnicate"}).code, cli::kExitConfig);
}

}  // namespace
}  // namespace gransim
