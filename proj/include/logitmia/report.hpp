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

#pragma once

/// @file report.hpp
/// @brief Command implementations behind the command-line tool: output
/// directory handling, run manifests and report files.

#include <openssl/evp.h>

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "logitmia/baseline_metrics.hpp"
#include "logitmia/evaluation.hpp"
#include "logitmia/library.hpp"
#include "logitmia/logits_store.hpp"
#include "logitmia/orchestrator.hpp"
#include "logitmia/simulator.hpp"
#include "logitmia/transport.hpp"

#ifndef LOGITMIA_VERSION
#define LOGITMIA_VERSION "0.1.0"
#endif

namespace logitmia::report {

namespace fs = std::filesystem;

enum class ExitCode : int { ok = 0, config_error = 2, data_error = 3, transport_error = 4 };

class CommandError : public std::runtime_error {
 public:
  CommandError(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const { return code_; }

 private:
  ExitCode code_;
};

// ---------------------------------------------------------------------------
// Formatting and files

/// Shortest representation that parses back to the same double; independent
/// of the global locale.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string sha256_hex(std::span<const char> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Fails unless `dir` is absent, empty, or `force` is set.
inline void check_out_dir(const fs::path& dir, bool force) {
  if (dir.empty()) throw CommandError(ExitCode::config_error, "an output directory is required (--out)");
  if (!fs::exists(dir)) return;
  if (!fs::is_directory(dir)) {
    throw CommandError(ExitCode::config_error, "output path '" + dir.string() + "' is not a directory");
  }
  if (!fs::is_empty(dir) && !force) {
    throw CommandError(ExitCode::config_error,
                       "output directory '" + dir.string() + "' is not empty; pass --force to replace it");
  }
}

/// Creates `dir`, clearing previous contents when `force` allows it.
inline void prepare_out_dir(const fs::path& dir, bool force) {
  check_out_dir(dir, force);
  if (fs::exists(dir)) {
    for (const auto& entry : fs::directory_iterator(dir)) fs::remove_all(entry.path());
  }
  fs::create_directories(dir);
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CommandError(ExitCode::data_error, "cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw CommandError(ExitCode::data_error, "write failed for '" + path.string() + "'");
}

inline void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

inline nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw CommandError(ExitCode::config_error, "cannot open config '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw CommandError(ExitCode::config_error, "config '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Manifest

struct RunManifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::optional<std::string> dataset_sha256;
  std::optional<std::uint64_t> seed;
  std::string started_at;
  std::string finished_at;
  std::string tool_version = LOGITMIA_VERSION;
  std::vector<std::string> outputs;
};

inline nlohmann::json manifest_to_json(const RunManifest& m) {
  nlohmann::json j = {{"command", m.command},
                      {"config", m.config},
                      {"dataset_sha256", nullptr},
                      {"seed", nullptr},
                      {"started_at", m.started_at},
                      {"finished_at", m.finished_at},
                      {"tool_version", m.tool_version},
                      {"outputs", m.outputs}};
  if (m.dataset_sha256) j["dataset_sha256"] = *m.dataset_sha256;
  if (m.seed) j["seed"] = *m.seed;
  return j;
}

/// Lists every file under `dir` (relative, sorted) and writes manifest.json.
inline void write_manifest(const fs::path& dir, RunManifest m) {
  m.finished_at = utc_timestamp();
  m.outputs.clear();
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) m.outputs.push_back(fs::relative(e.path(), dir).generic_string());
  }
  m.outputs.push_back("manifest.json");
  std::sort(m.outputs.begin(), m.outputs.end());
  write_json(dir / "manifest.json", manifest_to_json(m));
}

struct LoadedDataset {
  Dataset dataset;
  std::string sha256;
};

inline LoadedDataset load_dataset(const std::string& path) {
  try {
    const auto bytes = read_file_bytes(path);
    LoadedDataset out{decode_container(bytes), sha256_hex(bytes)};
    out.dataset.provenance = path;
    return out;
  } catch (const ContainerError& e) {
    throw CommandError(ExitCode::data_error, "cannot read container '" + path + "': " + e.what());
  }
}

inline StrategyLibrary load_library_file(const std::string& path) {
  try {
    return load(path);
  } catch (const LibraryError& e) {
    throw CommandError(ExitCode::data_error, "cannot read library '" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Result tables

inline std::string metric_cell(const StrategyResult& r, double v) {
  if (r.not_applicable) return "N/A";
  if (r.failed) return "FAILED";
  return format_number(v);
}

inline std::string results_csv(const std::vector<StrategyResult>& results) {
  std::string csv = "metric,auc,accuracy,tpr_at_5_fpr,q\n";
  for (const auto& r : results) {
    csv += r.name + "," + metric_cell(r, r.r.auc) + "," + metric_cell(r, r.r.acc) + "," +
           metric_cell(r, r.r.tpr_at_5fpr) + "," + metric_cell(r, r.q) + "\n";
  }
  return csv;
}

inline std::string roc_csv(const ScoreSet& scores) {
  std::string csv = "fpr,tpr\n";
  for (const auto& p : roc_curve(scores)) csv += format_number(p.fpr) + "," + format_number(p.tpr) + "\n";
  return csv;
}

inline bool usable(const StrategyResult& r) { return !r.failed && !r.not_applicable; }

/// Entries ordered by Q descending, then earlier round, then name.
inline std::vector<LibraryEntry> ranked_entries(const StrategyLibrary& lib, bool skip_failed = true) {
  std::vector<LibraryEntry> out;
  for (const auto& e : lib.entries()) {
    if (!skip_failed || !e.failed) out.push_back(e);
  }
  std::stable_sort(out.begin(), out.end(), [](const LibraryEntry& a, const LibraryEntry& b) {
    if (a.q != b.q) return a.q > b.q;
    if (a.round != b.round) return a.round < b.round;
    return a.spec.name < b.spec.name;
  });
  return out;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> target_auc;  // calibrate delta before generating
  std::string out;
  bool force = false;
  unsigned threads = 0;
};

inline int cmd_simulate(const SimulateOptions& opt, std::ostream& log = std::cerr) {
  const std::string started = utc_timestamp();
  check_out_dir(opt.out, opt.force);
  SimConfig cfg;
  std::optional<double> target = opt.target_auc;
  if (opt.config_path) {
    const auto j = read_json_file(*opt.config_path);
    if (!j.is_object()) throw CommandError(ExitCode::config_error, "simulation config must be a JSON object");
    static const std::set<std::string> known = {"n_member", "n_nonmember", "vocab", "seq_len",
                                                "delta",    "seed",        "target_auc"};
    std::string problems;
    for (const auto& [k, v] : j.items()) {
      if (!known.count(k)) problems += " unknown key '" + k + "';";
    }
    if (!problems.empty()) throw CommandError(ExitCode::config_error, "invalid simulation config:" + problems);
    try {
      cfg = j.get<SimConfig>();
      if (j.contains("target_auc") && !target) target = j["target_auc"].get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw CommandError(ExitCode::config_error, std::string("invalid simulation config: ") + e.what());
    }
  }
  if (opt.seed) cfg.seed = *opt.seed;
  try {
    validate_sim_config(cfg);
  } catch (const std::invalid_argument& e) {
    throw CommandError(ExitCode::config_error, e.what());
  }
  if (target && !(*target > 0.0 && *target <= 1.0)) {
    throw CommandError(ExitCode::config_error, "target_auc must lie in (0, 1]");
  }

  std::optional<CalibrationResult> calibration;
  if (target) {
    CalibrationOptions copt;
    copt.threads = opt.threads;
    log << "calibrating delta for target AUC " << format_number(*target) << "\n";
    calibration = calibrate_delta(*target, cfg, copt);
    cfg.delta = calibration->delta;
    log << "delta " << format_number(cfg.delta) << " gives AUC " << format_number(calibration->auc) << "\n";
    if (!calibration->warning.empty()) log << "warning: " << calibration->warning << "\n";
  }

  const Dataset ds = simulate_dataset(cfg);
  const auto bytes = encode_container(ds);
  const StrategySpec gap = gap_strategy();
  const auto scores = evaluate_strategies({gap}, ds, {}, opt.threads).front().scores;
  const SeparationStats stats = separation(scores);

  prepare_out_dir(opt.out, opt.force);
  const fs::path dir(opt.out);
  {
    std::ofstream out(dir / "dataset.amia", std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CommandError(ExitCode::data_error, "cannot write dataset.amia");
  }
  nlohmann::json stats_json = separation_to_json(stats, gap.name, cfg.delta);
  stats_json["config"] = cfg;
  write_json(dir / "stats.json", stats_json);
  if (calibration) write_json(dir / "calibration.json", calibration_to_json(*calibration, *target, cfg));

  RunManifest m;
  m.command = "simulate";
  m.config = cfg;
  if (target) m.config["target_auc"] = *target;
  m.dataset_sha256 = sha256_hex(bytes);
  m.seed = cfg.seed;
  m.started_at = started;
  write_manifest(dir, m);
  log << "wrote " << ds.records.size() << " records; " << gap.name << " AUC " << format_number(stats.auc) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval-baselines

struct EvalBaselinesOptions {
  std::string container;
  std::string out;
  bool force = false;
  unsigned threads = 0;
};

inline int cmd_eval_baselines(const EvalBaselinesOptions& opt, std::ostream& log = std::cerr) {
  const std::string started = utc_timestamp();
  check_out_dir(opt.out, opt.force);
  const auto loaded = load_dataset(opt.container);
  std::vector<StrategyResult> results;
  try {
    results = evaluate_strategies(list_baselines(), loaded.dataset, {}, opt.threads);
  } catch (const EvaluationError& e) {
    throw CommandError(ExitCode::data_error, e.what());
  }

  prepare_out_dir(opt.out, opt.force);
  const fs::path dir(opt.out);
  std::string jsonl;
  for (const auto& r : results) jsonl += nlohmann::json(r).dump() + "\n";
  write_text(dir / "results.jsonl", jsonl);
  write_text(dir / "results.csv", results_csv(results));
  fs::create_directories(dir / "roc");
  for (const auto& r : results) {
    if (usable(r)) write_text(dir / "roc" / (r.name + ".csv"), roc_csv(r.scores));
  }

  RunManifest m;
  m.command = "eval-baselines";
  m.config = {{"container", opt.container}};
  m.dataset_sha256 = loaded.sha256;
  m.started_at = started;
  write_manifest(dir, m);
  log << "evaluated " << results.size() << " baselines on " << loaded.dataset.records.size() << " records\n";
  return 0;
}

// ---------------------------------------------------------------------------
// run-loop

struct RunLoopOptions {
  std::string container;
  std::optional<std::string> config_path;
  std::optional<std::string> library;  // resume from an existing archive
  std::optional<std::uint64_t> seed;
  std::optional<BackendKind> backend;
  bool no_guidance = false;
  std::optional<unsigned> threads;
  std::string out;
  bool force = false;
  ChatTransport* transport = nullptr;  // overrides the configured backend transport
};

inline std::string usage_csv(const std::vector<RoundReport>& rounds) {
  std::string csv = "round,input_tokens,output_tokens\n";
  TokenUsage total;
  for (const auto& r : rounds) {
    csv += std::to_string(r.t) + "," + std::to_string(r.token_usage.input_tokens) + "," +
           std::to_string(r.token_usage.output_tokens) + "\n";
    total += r.token_usage;
  }
  csv += "total," + std::to_string(total.input_tokens) + "," + std::to_string(total.output_tokens) + "\n";
  return csv;
}

inline LoopConfig resolve_loop_config(const RunLoopOptions& opt) {
  LoopConfig cfg;
  try {
    if (opt.config_path) cfg = config_from_json(read_json_file(*opt.config_path));
  } catch (const ConfigValidationError& e) {
    throw CommandError(ExitCode::config_error, e.what());
  }
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.backend) cfg.backend = *opt.backend;
  if (opt.no_guidance) cfg.guidance_enabled = false;
  if (opt.threads) cfg.threads = *opt.threads;
  if (opt.config_path && !cfg.replay_fixture.empty() && fs::path(cfg.replay_fixture).is_relative()) {
    const fs::path beside = fs::path(*opt.config_path).parent_path() / cfg.replay_fixture;
    if (!fs::exists(cfg.replay_fixture) && fs::exists(beside)) cfg.replay_fixture = beside.string();
  }
  if (auto problems = validate_config(cfg); !problems.empty()) {
    throw CommandError(ExitCode::config_error, ConfigValidationError(problems).what());
  }
  return cfg;
}

inline nlohmann::json entry_summary(const LibraryEntry& e) {
  return {{"name", e.spec.name}, {"round", e.round},          {"q", e.q},
          {"auc", e.r.auc},      {"accuracy", e.r.acc},       {"tpr_at_5_fpr", e.r.tpr_at_5fpr},
          {"code", e.spec.code}, {"category", to_string(e.category)}};
}

inline int cmd_run_loop(const RunLoopOptions& opt, std::ostream& log = std::cerr) {
  const std::string started = utc_timestamp();
  check_out_dir(opt.out, opt.force);
  const LoopConfig cfg = resolve_loop_config(opt);
  StrategyLibrary initial;
  if (opt.library) initial = load_library_file(*opt.library);
  const auto loaded = load_dataset(opt.container);
  try {
    validate_dataset(loaded.dataset);
  } catch (const ContainerError& e) {
    throw CommandError(ExitCode::data_error, e.what());
  }
  if (loaded.dataset.member_count() == 0 || loaded.dataset.nonmember_count() == 0) {
    throw CommandError(ExitCode::data_error, "dataset needs at least one member and one non-member");
  }

  std::unique_ptr<ChatTransport> owned;
  ChatTransport* transport = opt.transport;
  const bool needs_transport = cfg.backend != BackendKind::offline_mutation ||
                               (cfg.guidance_enabled && cfg.guidance_backend == GuidanceBackend::llm);
  if (!transport && needs_transport) {
    try {
      if (cfg.backend == BackendKind::replay_fixtures) {
        owned = std::make_unique<ReplayTransport>(ReplayTransport::from_file(cfg.replay_fixture));
      } else {
        owned = std::make_unique<HttpChatTransport>(HttpChatConfig::from_env());
      }
    } catch (const ConfigError& e) {
      throw CommandError(ExitCode::config_error, e.what());
    }
    transport = owned.get();
  }

  prepare_out_dir(opt.out, opt.force);
  const fs::path dir(opt.out);
  fs::create_directories(dir / "rounds");
  persist(initial, (dir / "library.jsonl").string());

  LoopResult result;
  try {
    result = run_loop(loaded.dataset, cfg, transport, initial,
                      [&](const RoundReport& r, const StrategyLibrary& lib) {
                        write_json(dir / "rounds" / (std::to_string(r.t) + ".json"), round_to_json(r));
                        persist(lib, (dir / "library.jsonl").string());
                        log << "round " << r.t << ": " << r.candidates.size() << " candidates via "
                            << r.generator << ", best Q so far " << format_number(r.best_q_so_far) << "\n";
                      });
  } catch (const LoopAborted& e) {
    throw CommandError(ExitCode::transport_error, e.what());
  } catch (const TransportError& e) {
    throw CommandError(ExitCode::transport_error, e.what());
  } catch (const ConfigValidationError& e) {
    throw CommandError(ExitCode::config_error, e.what());
  }

  write_text(dir / "usage.csv", usage_csv(result.rounds));
  const auto ranked = ranked_entries(result.library);
  const std::vector<LibraryEntry> top(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(
                                                                          std::min<std::size_t>(5, ranked.size())));
  write_text(dir / "best_strategies.md", "# Best strategies\n\n" + render_markdown(top));

  const auto baselines = evaluate_strategies(list_baselines(), loaded.dataset, cfg.weights, cfg.threads);
  const StrategyResult* best_baseline = nullptr;
  for (const auto& b : baselines) {
    if (usable(b) && (!best_baseline || b.q > best_baseline->q)) best_baseline = &b;
  }
  nlohmann::json summary = {{"rounds", result.rounds.size()},
                            {"library_size", result.library.size()},
                            {"best_strategy", nullptr},
                            {"best_baseline", nullptr},
                            {"best_q_by_round", nlohmann::json::array()},
                            {"usage", result.usage},
                            {"guidance", cfg.guidance_enabled}};
  for (const auto& r : result.rounds) summary["best_q_by_round"].push_back({{"round", r.t}, {"best_q", r.best_q_so_far}});
  if (!ranked.empty()) summary["best_strategy"] = entry_summary(ranked.front());
  if (best_baseline) summary["best_baseline"] = nlohmann::json(*best_baseline);
  if (!ranked.empty() && best_baseline) summary["margin_q"] = ranked.front().q - best_baseline->q;
  write_json(dir / "summary.json", summary);

  std::string md = "# Discovered versus baseline\n\n| | name | Q | AUC | Accuracy | TPR@5%FPR |\n|---|---|---|---|---|---|\n";
  if (!ranked.empty()) {
    const auto& e = ranked.front();
    md += "| best discovered | " + e.spec.name + " | " + detail::fixed(e.q, 6) + " | " + detail::fixed(e.r.auc, 4) +
          " | " + detail::fixed(e.r.acc, 4) + " | " + detail::fixed(e.r.tpr_at_5fpr, 4) + " |\n";
  }
  if (best_baseline) {
    const auto& b = *best_baseline;
    md += "| best baseline | " + b.name + " | " + detail::fixed(b.q, 6) + " | " + detail::fixed(b.r.auc, 4) + " | " +
          detail::fixed(b.r.acc, 4) + " | " + detail::fixed(b.r.tpr_at_5fpr, 4) + " |\n";
  }
  write_text(dir / "summary.md", md);

  RunManifest m;
  m.command = "run-loop";
  m.config = config_to_json(cfg);
  m.config["container"] = opt.container;
  if (opt.library) m.config["resumed_from"] = *opt.library;
  m.dataset_sha256 = loaded.sha256;
  m.seed = cfg.seed;
  m.started_at = started;
  write_manifest(dir, m);
  return 0;
}

// ---------------------------------------------------------------------------
// holdout-eval

struct HoldoutOptions {
  std::string container;
  std::string library;
  double fraction = 0.5;
  std::uint64_t seed = 0;
  std::size_t top = 5;
  std::string out;
  bool force = false;
  unsigned threads = 0;
};

inline nlohmann::json tuple_json(const StrategyResult& r) {
  if (!usable(r)) return {{"auc", nullptr}, {"accuracy", nullptr}, {"tpr_at_5_fpr", nullptr}, {"q", nullptr}};
  return {{"auc", r.r.auc}, {"accuracy", r.r.acc}, {"tpr_at_5_fpr", r.r.tpr_at_5fpr}, {"q", r.q}};
}

inline int cmd_holdout_eval(const HoldoutOptions& opt, std::ostream& log = std::cerr) {
  const std::string started = utc_timestamp();
  check_out_dir(opt.out, opt.force);
  if (!(opt.fraction > 0.0 && opt.fraction < 1.0)) {
    throw CommandError(ExitCode::config_error, "fraction must lie in (0, 1)");
  }
  const StrategyLibrary lib = load_library_file(opt.library);
  const auto ranked = ranked_entries(lib);
  if (ranked.empty()) throw CommandError(ExitCode::data_error, "library has no evaluable strategies");
  const auto loaded = load_dataset(opt.container);
  std::pair<Dataset, Dataset> split;
  try {
    split = split_holdout(loaded.dataset, opt.fraction, opt.seed);
  } catch (const EvaluationError& e) {
    throw CommandError(ExitCode::data_error, e.what());
  }
  const std::size_t n = std::min(opt.top, ranked.size());
  std::vector<StrategySpec> specs;
  for (std::size_t i = 0; i < n; ++i) specs.push_back(ranked[i].spec);
  const auto val = evaluate_strategies(specs, split.first, {}, opt.threads);
  const auto hold = evaluate_strategies(specs, split.second, {}, opt.threads);

  prepare_out_dir(opt.out, opt.force);
  const fs::path dir(opt.out);
  nlohmann::json table = {{"fraction", opt.fraction},
                          {"seed", opt.seed},
                          {"n_validation", split.first.records.size()},
                          {"n_holdout", split.second.records.size()},
                          {"rows", nlohmann::json::array()}};
  if (n < opt.top) {
    table["note"] = "library has " + std::to_string(n) + " evaluable strategies; all were evaluated";
  }
  std::string csv =
      "strategy,validation_auc,validation_accuracy,validation_tpr_at_5_fpr,holdout_auc,holdout_accuracy,"
      "holdout_tpr_at_5_fpr\n";
  std::string md =
      "| Strategy | Validation AUC | Validation Acc | Validation TPR@5%FPR | Holdout AUC | Holdout Acc | Holdout "
      "TPR@5%FPR |\n|---|---|---|---|---|---|---|\n";
  for (std::size_t i = 0; i < n; ++i) {
    table["rows"].push_back({{"name", specs[i].name}, {"validation", tuple_json(val[i])}, {"holdout", tuple_json(hold[i])}});
    csv += specs[i].name + "," + metric_cell(val[i], val[i].r.auc) + "," + metric_cell(val[i], val[i].r.acc) + "," +
           metric_cell(val[i], val[i].r.tpr_at_5fpr) + "," + metric_cell(hold[i], hold[i].r.auc) + "," +
           metric_cell(hold[i], hold[i].r.acc) + "," + metric_cell(hold[i], hold[i].r.tpr_at_5fpr) + "\n";
    auto cell = [](const StrategyResult& r, double v) { return usable(r) ? detail::fixed(v, 4) : metric_cell(r, v); };
    md += "| " + specs[i].name + " | " + cell(val[i], val[i].r.auc) + " | " + cell(val[i], val[i].r.acc) + " | " +
          cell(val[i], val[i].r.tpr_at_5fpr) + " | " + cell(hold[i], hold[i].r.auc) + " | " +
          cell(hold[i], hold[i].r.acc) + " | " + cell(hold[i], hold[i].r.tpr_at_5fpr) + " |\n";
  }
  write_json(dir / "holdout.json", table);
  write_text(dir / "holdout.csv", csv);
  write_text(dir / "holdout.md", md);

  RunManifest m;
  m.command = "holdout-eval";
  m.config = {{"container", opt.container}, {"library", opt.library}, {"fraction", opt.fraction}, {"top", opt.top}};
  m.dataset_sha256 = loaded.sha256;
  m.seed = opt.seed;
  m.started_at = started;
  write_manifest(dir, m);
  log << "evaluated " << n << " strategies on " << split.first.records.size() << " validation and "
      << split.second.records.size() << " holdout records\n";
  return 0;
}

// ---------------------------------------------------------------------------
// export-report

struct ExportReportOptions {
  std::string library;
  std::string out;
  bool force = false;
};

inline int cmd_export_report(const ExportReportOptions& opt, std::ostream& log = std::cerr) {
  const std::string started = utc_timestamp();
  check_out_dir(opt.out, opt.force);
  const StrategyLibrary lib = load_library_file(opt.library);
  const auto ranked = ranked_entries(lib, false);

  prepare_out_dir(opt.out, opt.force);
  const fs::path dir(opt.out);
  write_text(dir / "strategies.md", "# Strategy library\n\n" + render_markdown(ranked));
  std::string csv = "name,round,category,q,auc,accuracy,tpr_at_5_fpr,failed,direction,code\n";
  for (const auto& e : ranked) {
    std::string code = e.spec.code;
    std::string quoted = "\"";
    for (char c : code) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
    quoted += "\"";
    csv += e.spec.name + "," + std::to_string(e.round) + "," + std::string(to_string(e.category)) + "," +
           format_number(e.q) + "," + format_number(e.r.auc) + "," + format_number(e.r.acc) + "," +
           format_number(e.r.tpr_at_5fpr) + "," + (e.failed ? "true" : "false") + "," +
           std::string(to_string(e.spec.direction)) + "," + quoted + "\n";
  }
  write_text(dir / "library.csv", csv);

  std::string rounds = "round,entries,strong,best_q,best_q_so_far\n";
  double so_far = -std::numeric_limits<double>::infinity();
  for (int t = 1; t <= lib.max_round(); ++t) {
    std::size_t count = 0, strong = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& e : lib.entries()) {
      if (e.round != t) continue;
      ++count;
      strong += e.category == Category::strong;
      best = std::max(best, e.q);
    }
    if (count == 0) {
      rounds += std::to_string(t) + ",0,0,N/A," + (std::isfinite(so_far) ? format_number(so_far) : "N/A") + "\n";
      continue;
    }
    so_far = std::max(so_far, best);
    rounds += std::to_string(t) + "," + std::to_string(count) + "," + std::to_string(strong) + "," +
              format_number(best) + "," + format_number(so_far) + "\n";
  }
  write_text(dir / "rounds.csv", rounds);

  RunManifest m;
  m.command = "export-report";
  m.config = {{"library", opt.library}};
  m.started_at = started;
  write_manifest(dir, m);
  log << "exported " << ranked.size() << " entries\n";
  return 0;
}

}  // namespace logitmia::report
