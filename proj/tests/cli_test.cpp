// Copyright 2026 The logitmia Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <sys/wait.h>

#include <clocale>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "gtest/gtest.h"
#include "logitmia/report.hpp"
#include "test_util.hpp"

namespace logitmia::report {
namespace {

const std::string kFixtures = LOGITMIA_FIXTURE_DIR;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root_ = fs::temp_directory_path() / ("logitmia_cli_" + std::string(info->name()) + "_" +
                                         std::to_string(::getpid()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  std::string path(const std::string& name) const { return (root_ / name).string(); }

  std::string simulated_container(const std::string& name = "data.amia", double delta = 0.8) const {
    SimConfig cfg;
    cfg.n_member = 40;
    cfg.n_nonmember = 40;
    cfg.vocab = 48;
    cfg.seq_len = 12;
    cfg.delta = delta;
    cfg.seed = 21;
    write_container(simulate_dataset(cfg), path(name));
    return path(name);
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static std::vector<std::string> lines(const fs::path& p) {
    std::vector<std::string> out;
    std::istringstream in(slurp(p));
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
  }

  static std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    for (std::string cell; std::getline(in, cell, ',');) out.push_back(cell);
    return out;
  }

  fs::path root_;
  std::ostringstream log_;
};

TEST(FormatNumberTest, RoundTripsAndIgnoresLocale) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) / (1 + i);
    EXPECT_EQ(std::stod(format_number(v)), v);
  }
  EXPECT_EQ(format_number(0.5), "0.5");
  EXPECT_EQ(format_number(std::numeric_limits<double>::infinity()), "inf");
  std::locale::global(std::locale("C"));
  std::ostringstream os;
  os.imbue(std::locale::classic());
  EXPECT_EQ(format_number(1234.5), "1234.5");
}

TEST(Sha256Test, KnownDigests) {
  const std::string empty;
  EXPECT_EQ(sha256_hex(empty), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const std::string abc = "abc";
  EXPECT_EQ(sha256_hex(abc), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_F(CliTest, EvalBaselinesWritesTwentyRowsAndRocFiles) {
  const auto container = simulated_container();
  ASSERT_EQ(cmd_eval_baselines({container, path("out"), false, 1}, log_), 0);
  const auto jsonl = lines(root_ / "out" / "results.jsonl");
  EXPECT_EQ(jsonl.size(), 20u);
  const auto csv = lines(root_ / "out" / "results.csv");
  ASSERT_EQ(csv.size(), 21u);
  EXPECT_EQ(csv[0], "metric,auc,accuracy,tpr_at_5_fpr,q");
  // Every numeric cell parses back to the in-memory value.
  const auto results = evaluate_strategies(list_baselines(), read_container(container), {}, 1);
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto cells = split_csv(csv[i + 1]);
    ASSERT_EQ(cells.size(), 5u);
    EXPECT_EQ(cells[0], results[i].name);
    EXPECT_EQ(std::stod(cells[1]), results[i].r.auc);
    EXPECT_EQ(std::stod(cells[2]), results[i].r.acc);
    EXPECT_EQ(std::stod(cells[3]), results[i].r.tpr_at_5fpr);
    EXPECT_EQ(std::stod(cells[4]), results[i].q);
    const auto j = nlohmann::json::parse(jsonl[i]);
    EXPECT_EQ(j["auc"].get<double>(), results[i].r.auc);
    EXPECT_TRUE(fs::exists(root_ / "out" / "roc" / (results[i].name + ".csv")));
  }
  const auto roc = lines(root_ / "out" / "roc" / "perplexity.csv");
  EXPECT_EQ(roc.front(), "fpr,tpr");
  EXPECT_EQ(roc[1], "0,0");
  EXPECT_EQ(roc.back(), "1,1");
}

TEST_F(CliTest, ImageSliceRowsPrintNotApplicable) {
  std::mt19937_64 rng(3);
  Dataset ds = testing::random_dataset(rng, 16, 6, 6, 6);
  for (auto& r : ds.records) r.slice = Slice::img;
  write_container(ds, path("img.amia"));
  ASSERT_EQ(cmd_eval_baselines({path("img.amia"), path("out"), false, 1}, log_), 0);
  const auto csv = lines(root_ / "out" / "results.csv");
  std::size_t na_rows = 0;
  for (std::size_t i = 1; i < csv.size(); ++i) {
    const auto cells = split_csv(csv[i]);
    if (cells[1] == "N/A") {
      ++na_rows;
      EXPECT_EQ(cells[2], "N/A");
      EXPECT_FALSE(fs::exists(root_ / "out" / "roc" / (cells[0] + ".csv")));
    }
  }
  // perplexity, three Min-k rows and three modified Renyi rows read targets.
  EXPECT_EQ(na_rows, 7u);
}

TEST_F(CliTest, EmptyClassFailsBeforeAnyFileIsWritten) {
  std::mt19937_64 rng(5);
  write_container(testing::random_dataset(rng, 8, 4, 5, 0), path("members_only.amia"));
  try {
    cmd_eval_baselines({path("members_only.amia"), path("out"), false, 1}, log_);
    FAIL() << "expected CommandError";
  } catch (const CommandError& e) {
    EXPECT_EQ(e.code(), ExitCode::data_error);
  }
  EXPECT_FALSE(fs::exists(root_ / "out"));
}

TEST_F(CliTest, RefusesNonEmptyOutputWithoutForce) {
  const auto container = simulated_container();
  fs::create_directories(root_ / "out");
  write_text(root_ / "out" / "keep.txt", "x");
  try {
    cmd_eval_baselines({container, path("out"), false, 1}, log_);
    FAIL() << "expected CommandError";
  } catch (const CommandError& e) {
    EXPECT_EQ(e.code(), ExitCode::config_error);
  }
  EXPECT_TRUE(fs::exists(root_ / "out" / "keep.txt"));
  ASSERT_EQ(cmd_eval_baselines({container, path("out"), true, 1}, log_), 0);
  EXPECT_FALSE(fs::exists(root_ / "out" / "keep.txt"));
  const auto first = slurp(root_ / "out" / "results.csv");
  ASSERT_EQ(cmd_eval_baselines({container, path("out"), true, 1}, log_), 0);
  EXPECT_EQ(slurp(root_ / "out" / "results.csv"), first);
}

TEST_F(CliTest, ManifestHashMatchesContainerBytes) {
  const auto container = simulated_container();
  ASSERT_EQ(cmd_eval_baselines({container, path("out"), false, 1}, log_), 0);
  std::size_t manifests = 0;
  for (const auto& e : fs::recursive_directory_iterator(root_ / "out")) manifests += e.path().filename() == "manifest.json";
  EXPECT_EQ(manifests, 1u);
  const auto m = nlohmann::json::parse(slurp(root_ / "out" / "manifest.json"));
  const auto bytes = slurp(container);
  EXPECT_EQ(m["dataset_sha256"], sha256_hex(bytes));
  EXPECT_EQ(m["command"], "eval-baselines");
  EXPECT_EQ(m["tool_version"], LOGITMIA_VERSION);
  EXPECT_FALSE(m["started_at"].get<std::string>().empty());
  const auto outputs = m["outputs"].get<std::vector<std::string>>();
  EXPECT_NE(std::find(outputs.begin(), outputs.end(), "results.csv"), outputs.end());
  EXPECT_NE(std::find(outputs.begin(), outputs.end(), "roc/perplexity.csv"), outputs.end());
}

TEST_F(CliTest, SimulateWritesContainerStatsAndCalibration) {
  write_text(root_ / "sim.json", R"({"n_member": 30, "n_nonmember": 30, "vocab": 32, "seq_len": 8, "seed": 4})");
  SimulateOptions o;
  o.config_path = path("sim.json");
  o.target_auc = 0.8;
  o.out = path("sim");
  o.threads = 1;
  ASSERT_EQ(cmd_simulate(o, log_), 0);
  const auto stats = nlohmann::json::parse(slurp(root_ / "sim" / "stats.json"));
  for (const char* key : {"metric", "auc", "cohens_d", "welch_p", "delta"}) EXPECT_TRUE(stats.contains(key)) << key;
  const auto cal = nlohmann::json::parse(slurp(root_ / "sim" / "calibration.json"));
  EXPECT_EQ(stats["delta"], cal["delta"]);
  const auto ds = read_container(path("sim/dataset.amia"));
  EXPECT_EQ(ds.records.size(), 60u);
  const auto m = nlohmann::json::parse(slurp(root_ / "sim" / "manifest.json"));
  EXPECT_EQ(m["dataset_sha256"], sha256_hex(slurp(root_ / "sim" / "dataset.amia")));
  EXPECT_EQ(m["seed"], 4);
}

TEST_F(CliTest, SimulateRejectsUnknownConfigKeys) {
  write_text(root_ / "sim.json", R"({"n_member": 30, "vocabulary": 32})");
  SimulateOptions o;
  o.config_path = path("sim.json");
  o.out = path("sim");
  try {
    cmd_simulate(o, log_);
    FAIL() << "expected CommandError";
  } catch (const CommandError& e) {
    EXPECT_EQ(e.code(), ExitCode::config_error);
    EXPECT_NE(std::string(e.what()).find("vocabulary"), std::string::npos);
  }
}

TEST_F(CliTest, RunLoopArtifactsAndResume) {
  const auto container = simulated_container();
  RunLoopOptions o;
  o.container = container;
  o.config_path = kFixtures + "/loop_config.json";
  o.threads = 1;
  o.out = path("run");
  write_text(root_ / "short.json", R"({"rounds": 2, "seed": 7})");
  o.config_path = path("short.json");
  ASSERT_EQ(cmd_run_loop(o, log_), 0);
  for (const char* f : {"library.jsonl", "rounds/1.json", "rounds/2.json", "usage.csv", "best_strategies.md",
                        "summary.json", "summary.md", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(root_ / "run" / f)) << f;
  }
  EXPECT_EQ(lines(root_ / "run" / "usage.csv").back(), "total,0,0");
  const auto summary = nlohmann::json::parse(slurp(root_ / "run" / "summary.json"));
  EXPECT_TRUE(summary["best_strategy"].is_object());
  EXPECT_TRUE(summary["best_baseline"].is_object());
  EXPECT_NE(slurp(root_ / "run" / "best_strategies.md").find("**Executable Implementation.**"), std::string::npos);

  RunLoopOptions resume = o;
  resume.library = path("run/library.jsonl");
  resume.out = path("resumed");
  ASSERT_EQ(cmd_run_loop(resume, log_), 0);
  EXPECT_TRUE(fs::exists(root_ / "resumed" / "rounds" / "3.json"));
  EXPECT_TRUE(fs::exists(root_ / "resumed" / "rounds" / "4.json"));
  EXPECT_FALSE(fs::exists(root_ / "resumed" / "rounds" / "1.json"));
  EXPECT_EQ(load(path("resumed/library.jsonl")).max_round(), 4);
}

TEST_F(CliTest, RunLoopNoGuidanceFlag) {
  const auto container = simulated_container();
  write_text(root_ / "cfg.json", R"({"rounds": 2, "seed": 7})");
  RunLoopOptions o;
  o.container = container;
  o.config_path = path("cfg.json");
  o.no_guidance = true;
  o.threads = 1;
  o.out = path("run");
  ASSERT_EQ(cmd_run_loop(o, log_), 0);
  for (int t : {1, 2}) {
    const auto r = nlohmann::json::parse(slurp(root_ / "run" / "rounds" / (std::to_string(t) + ".json")));
    EXPECT_TRUE(r["guidance"].is_null());
  }
}

TEST_F(CliTest, RunLoopReplayBackendAndConfigErrors) {
  const auto container = simulated_container();
  write_text(root_ / "cfg.json",
             R"({"rounds": 3, "backend": "replay", "replay_fixture": ")" + kFixtures + R"(/responses.jsonl"})");
  RunLoopOptions o;
  o.container = container;
  o.config_path = path("cfg.json");
  o.threads = 1;
  o.out = path("run");
  ASSERT_EQ(cmd_run_loop(o, log_), 0);
  const auto usage = lines(root_ / "run" / "usage.csv");
  EXPECT_EQ(usage[1], "1,1200,310");
  EXPECT_EQ(usage.back(), "total,3950,512");

  write_text(root_ / "bad.json", R"({"rounds": -1, "window": 0, "colour": 1})");
  o.config_path = path("bad.json");
  o.out = path("bad_run");
  try {
    cmd_run_loop(o, log_);
    FAIL() << "expected CommandError";
  } catch (const CommandError& e) {
    EXPECT_EQ(e.code(), ExitCode::config_error);
    const std::string what = e.what();
    EXPECT_NE(what.find("rounds"), std::string::npos);
    EXPECT_NE(what.find("window"), std::string::npos);
    EXPECT_NE(what.find("colour"), std::string::npos);
  }
  EXPECT_FALSE(fs::exists(root_ / "bad_run"));
}

TEST_F(CliTest, RunLoopAbortMapsToTransportExitCode) {
  const auto container = simulated_container();
  write_text(root_ / "cfg.json", R"({"rounds": 4, "backend": "replay", "fallback": "abort", "replay_fixture": ")" +
                                     kFixtures + R"(/responses.jsonl"})");
  RunLoopOptions o;
  o.container = container;
  o.config_path = path("cfg.json");
  o.threads = 1;
  o.out = path("run");
  try {
    cmd_run_loop(o, log_);
    FAIL() << "expected CommandError";
  } catch (const CommandError& e) {
    EXPECT_EQ(e.code(), ExitCode::transport_error);
  }
  EXPECT_TRUE(fs::exists(root_ / "run" / "rounds" / "3.json"));
}

TEST_F(CliTest, HoldoutTableHasBothColumnGroupsAndIsDeterministic) {
  const auto container = simulated_container();
  write_text(root_ / "cfg.json", R"({"rounds": 2, "seed": 7})");
  RunLoopOptions o;
  o.container = container;
  o.config_path = path("cfg.json");
  o.threads = 1;
  o.out = path("run");
  ASSERT_EQ(cmd_run_loop(o, log_), 0);

  HoldoutOptions h;
  h.container = container;
  h.library = path("run/library.jsonl");
  h.seed = 9;
  h.threads = 1;
  h.out = path("hold1");
  ASSERT_EQ(cmd_holdout_eval(h, log_), 0);
  h.out = path("hold2");
  ASSERT_EQ(cmd_holdout_eval(h, log_), 0);
  EXPECT_EQ(slurp(root_ / "hold1" / "holdout.csv"), slurp(root_ / "hold2" / "holdout.csv"));

  const auto csv = lines(root_ / "hold1" / "holdout.csv");
  EXPECT_EQ(csv[0],
            "strategy,validation_auc,validation_accuracy,validation_tpr_at_5_fpr,holdout_auc,holdout_accuracy,"
            "holdout_tpr_at_5_fpr");
  EXPECT_EQ(csv.size(), 6u);
  const auto j = nlohmann::json::parse(slurp(root_ / "hold1" / "holdout.json"));
  EXPECT_EQ(j["n_validation"], 40);
  EXPECT_EQ(j["n_holdout"], 40);
  for (const auto& row : j["rows"]) {
    EXPECT_TRUE(row["validation"].contains("auc"));
    EXPECT_TRUE(row["holdout"].contains("auc"));
  }
  EXPECT_NE(slurp(root_ / "hold1" / "holdout.md").find("Validation AUC"), std::string::npos);
}

TEST_F(CliTest, HoldoutOnSmallLibraryEvaluatesAllWithNote) {
  const auto container = simulated_container();
  StrategyLibrary lib;
  LibraryEntry e;
  e.spec = list_baselines()[0];
  e.round = 1;
  lib.insert({e});
  persist(lib, path("lib.jsonl"));
  HoldoutOptions h;
  h.container = container;
  h.library = path("lib.jsonl");
  h.out = path("hold");
  h.threads = 1;
  ASSERT_EQ(cmd_holdout_eval(h, log_), 0);
  const auto j = nlohmann::json::parse(slurp(root_ / "hold" / "holdout.json"));
  EXPECT_EQ(j["rows"].size(), 1u);
  EXPECT_TRUE(j.contains("note"));
}

TEST_F(CliTest, ExportReportRendersLibrary) {
  StrategyLibrary lib;
  for (int t = 1; t <= 2; ++t) {
    std::vector<RoundCandidate> round;
    for (int i = 0; i < 3; ++i) {
      RoundCandidate c;
      c.spec = list_baselines()[static_cast<std::size_t>(i)];
      c.q = 0.1 * (t + i);
      round.push_back(c);
    }
    lib.insert(categorize(round, t));
  }
  persist(lib, path("lib.jsonl"));
  ASSERT_EQ(cmd_export_report({path("lib.jsonl"), path("rep"), false}, log_), 0);
  EXPECT_EQ(lines(root_ / "rep" / "library.csv").size(), 7u);
  const auto rounds = lines(root_ / "rep" / "rounds.csv");
  ASSERT_EQ(rounds.size(), 3u);
  EXPECT_EQ(rounds[2], "2,3,1,0.4,0.4");
  EXPECT_NE(slurp(root_ / "rep" / "strategies.md").find("### Strategy 6"), std::string::npos);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(LOGITMIA_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST_F(CliTest, BinaryExitCodes) {
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("no-such-command"), 2);
  EXPECT_EQ(run_cli("eval-baselines " + path("missing.amia") + " --out " + path("o1")), 3);
  EXPECT_EQ(run_cli("run-loop " + simulated_container() + " --backend llm --out " + path("o2")), 2);
  EXPECT_EQ(run_cli("eval-baselines " + simulated_container() + " --out " + path("o3") + " --threads 1"), 0);
  EXPECT_EQ(run_cli("eval-baselines " + simulated_container() + " --out " + path("o3")), 2);
}

}  // namespace
}  // namespace logitmia::report
