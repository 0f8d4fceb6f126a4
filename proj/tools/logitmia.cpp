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

// Command-line front end: simulate, eval-baselines, run-loop, holdout-eval
// and export-report.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "logitmia/report.hpp"

namespace {

using logitmia::report::CommandError;
using logitmia::report::ExitCode;

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool force = false;
  bool no_guidance = false;
  std::string backend;
  std::optional<unsigned> threads;
};

std::optional<std::string> optional_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Logits-level membership inference: baselines, strategy search and reports"};
  app.set_version_flag("--version", LOGITMIA_VERSION);
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config, "JSON configuration file");
  app.add_option("--seed", g.seed, "Seed override");
  app.add_option("--out", g.out, "Output directory");
  app.add_flag("--force", g.force, "Replace a non-empty output directory");
  app.add_flag("--no-guidance", g.no_guidance, "Disable per-round guidance (run-loop)");
  app.add_option("--backend", g.backend, "Candidate generator backend (run-loop)")
      ->check(CLI::IsMember({"llm", "replay", "offline"}));
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)");

  auto* simulate = app.add_subcommand("simulate", "Generate a simulated logits container and separation stats");
  std::optional<double> target_auc;
  simulate->add_option("--target-auc", target_auc, "Calibrate delta so the gap metric reaches this AUC");

  auto* eval = app.add_subcommand("eval-baselines", "Evaluate the baseline grid on a container");
  std::string eval_container;
  eval->add_option("container", eval_container, "Logits container")->required();

  auto* loop = app.add_subcommand("run-loop", "Run the closed-loop strategy search");
  std::string loop_container, resume_library;
  loop->add_option("container", loop_container, "Logits container")->required();
  loop->add_option("--library", resume_library, "Resume from this library.jsonl");

  auto* holdout = app.add_subcommand("holdout-eval", "Re-evaluate top strategies on a stratified split");
  std::string hold_container, hold_library;
  double fraction = 0.5;
  std::size_t top = 5;
  holdout->add_option("container", hold_container, "Logits container")->required();
  holdout->add_option("library", hold_library, "Strategy library (library.jsonl)")->required();
  holdout->add_option("--fraction", fraction, "Validation fraction per class")->capture_default_str();
  holdout->add_option("--top", top, "Number of strategies")->capture_default_str();

  auto* exporter = app.add_subcommand("export-report", "Render a library as markdown and CSV tables");
  std::string export_library;
  exporter->add_option("library", export_library, "Strategy library (library.jsonl)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::config_error);
  }

  using namespace logitmia;
  using namespace logitmia::report;
  try {
    if (*simulate) {
      SimulateOptions o;
      o.config_path = optional_path(g.config);
      o.seed = g.seed;
      o.target_auc = target_auc;
      o.out = g.out;
      o.force = g.force;
      o.threads = g.threads.value_or(0);
      return cmd_simulate(o);
    }
    if (*eval) {
      return cmd_eval_baselines({eval_container, g.out, g.force, g.threads.value_or(0)});
    }
    if (*loop) {
      RunLoopOptions o;
      o.container = loop_container;
      o.config_path = optional_path(g.config);
      o.library = optional_path(resume_library);
      o.seed = g.seed;
      if (!g.backend.empty()) o.backend = backend_from_string(g.backend);
      o.no_guidance = g.no_guidance;
      o.threads = g.threads;
      o.out = g.out;
      o.force = g.force;
      return cmd_run_loop(o);
    }
    if (*holdout) {
      HoldoutOptions o;
      o.container = hold_container;
      o.library = hold_library;
      o.fraction = fraction;
      o.seed = g.seed.value_or(0);
      o.top = top;
      o.out = g.out;
      o.force = g.force;
      o.threads = g.threads.value_or(0);
      return cmd_holdout_eval(o);
    }
    if (*exporter) return cmd_export_report({export_library, g.out, g.force});
  } catch (const CommandError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::data_error);
  }
  return 0;
}
