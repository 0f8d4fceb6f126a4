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

// The closed search loop: select context, generate candidates, evaluate,
// review, categorize and archive, one round at a time.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "logitmia/evaluation.hpp"
#include "logitmia/generation.hpp"
#include "logitmia/guidance.hpp"
#include "logitmia/library.hpp"
#include "logitmia/prompts.hpp"
#include "logitmia/transport.hpp"

namespace logitmia {

enum class BackendKind { llm_chat, replay_fixtures, offline_mutation };
enum class GuidanceBackend { rule_based, llm };
enum class FallbackPolicy { abort, offline_mutation };

inline std::string_view to_string(BackendKind k) {
  switch (k) {
    case BackendKind::llm_chat: return "llm";
    case BackendKind::replay_fixtures: return "replay";
    case BackendKind::offline_mutation: return "offline";
  }
  return "?";
}

inline std::optional<BackendKind> backend_from_string(std::string_view s) {
  if (s == "llm" || s == "llm_chat") return BackendKind::llm_chat;
  if (s == "replay" || s == "replay_fixtures") return BackendKind::replay_fixtures;
  if (s == "offline" || s == "offline_mutation") return BackendKind::offline_mutation;
  return std::nullopt;
}

struct LoopConfig {
  int rounds = 10;
  std::size_t candidates = 5;
  std::size_t window = 5;
  Weights weights;
  bool guidance_enabled = true;
  BackendKind backend = BackendKind::offline_mutation;
  GuidanceBackend guidance_backend = GuidanceBackend::rule_based;
  FallbackPolicy fallback = FallbackPolicy::offline_mutation;
  std::string model;
  double temperature = 0.6;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::string replay_fixture;
};

/// Lists every problem found in a configuration, not just the first.
class ConfigValidationError : public std::runtime_error {
 public:
  explicit ConfigValidationError(std::vector<std::string> problems)
      : std::runtime_error(join_problems(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join_problems(const std::vector<std::string>& p) {
    std::string s = "invalid configuration:";
    for (const auto& x : p) s += "\n  - " + x;
    return s;
  }
  std::vector<std::string> problems_;
};

inline nlohmann::json config_to_json(const LoopConfig& c) {
  return {{"rounds", c.rounds},
          {"candidates_per_round", c.candidates},
          {"window", c.window},
          {"weights", {{"auc", c.weights.w_auc}, {"accuracy", c.weights.w_acc}, {"tpr", c.weights.w_tpr}}},
          {"guidance", c.guidance_enabled},
          {"guidance_backend", c.guidance_backend == GuidanceBackend::llm ? "llm" : "rule_based"},
          {"backend", std::string(to_string(c.backend))},
          {"fallback", c.fallback == FallbackPolicy::abort ? "abort" : "offline_mutation"},
          {"model", c.model},
          {"temperature", c.temperature},
          {"seed", c.seed},
          {"threads", c.threads},
          {"replay_fixture", c.replay_fixture}};
}

/// Checks the cross-field rules of a configuration.
inline std::vector<std::string> validate_config(const LoopConfig& c) {
  std::vector<std::string> p;
  if (c.rounds < 0) p.push_back("rounds must be >= 0");
  if (c.candidates == 0) p.push_back("candidates_per_round must be >= 1");
  if (c.window == 0) p.push_back("window must be >= 1");
  for (double w : {c.weights.w_auc, c.weights.w_acc, c.weights.w_tpr}) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      p.push_back("weights must be finite and non-negative");
      break;
    }
  }
  if (!(c.temperature >= 0.0 && c.temperature <= 2.0)) p.push_back("temperature must lie in [0, 2]");
  const bool needs_model = c.backend == BackendKind::llm_chat ||
                           (c.guidance_enabled && c.guidance_backend == GuidanceBackend::llm &&
                            c.backend != BackendKind::replay_fixtures);
  if (needs_model && c.model.empty()) p.push_back("model is required for the llm backend");
  if (c.backend == BackendKind::replay_fixtures && c.replay_fixture.empty()) {
    p.push_back("replay_fixture is required for the replay backend");
  }
  if (c.backend == BackendKind::offline_mutation && c.guidance_enabled &&
      c.guidance_backend == GuidanceBackend::llm) {
    p.push_back("llm guidance needs the llm or replay backend");
  }
  return p;
}

/// Reads a configuration, collecting every unknown key, type error and
/// rule violation before throwing.
inline LoopConfig config_from_json(const nlohmann::json& j, LoopConfig c = {}) {
  std::vector<std::string> p;
  if (!j.is_object()) throw ConfigValidationError({"configuration must be a JSON object"});
  static const std::set<std::string> known = {"rounds", "candidates_per_round", "window", "weights",
                                              "guidance", "guidance_backend", "backend", "fallback",
                                              "model", "temperature", "seed", "threads", "replay_fixture"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) p.push_back("unknown key '" + k + "'");
  }
  auto read = [&](const char* key, auto& dst, const char* what) {
    if (!j.contains(key)) return;
    try {
      dst = j.at(key).get<std::remove_reference_t<decltype(dst)>>();
    } catch (const nlohmann::json::exception&) {
      p.push_back(std::string("'") + key + "' must be " + what);
    }
  };
  if (j.contains("rounds") && !j["rounds"].is_number_integer()) {
    p.push_back("'rounds' must be an integer");
  } else {
    read("rounds", c.rounds, "an integer");
  }
  for (const char* key : {"candidates_per_round", "window"}) {
    if (!j.contains(key)) continue;
    if (!j[key].is_number_integer() || j[key].get<long long>() < 0) {
      p.push_back(std::string("'") + key + "' must be a non-negative integer");
      continue;
    }
    (std::string(key) == "window" ? c.window : c.candidates) = j[key].get<std::size_t>();
  }
  read("guidance", c.guidance_enabled, "a boolean");
  read("model", c.model, "a string");
  read("temperature", c.temperature, "a number");
  read("replay_fixture", c.replay_fixture, "a string");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0)) {
      p.push_back("'seed' must be a non-negative integer");
    } else {
      c.seed = j["seed"].get<std::uint64_t>();
    }
  }
  if (j.contains("threads")) {
    if (!j["threads"].is_number_integer() || j["threads"].get<long long>() < 0) {
      p.push_back("'threads' must be a non-negative integer");
    } else {
      c.threads = j["threads"].get<unsigned>();
    }
  }
  if (j.contains("weights")) {
    const auto& w = j["weights"];
    if (!w.is_object()) {
      p.push_back("'weights' must be an object with auc, accuracy and tpr");
    } else {
      for (const auto& [k, v] : w.items()) {
        double* dst = k == "auc" ? &c.weights.w_auc : k == "accuracy" ? &c.weights.w_acc
                                                  : k == "tpr"      ? &c.weights.w_tpr
                                                                    : nullptr;
        if (!dst) {
          p.push_back("unknown weight '" + k + "'");
        } else if (!v.is_number()) {
          p.push_back("weight '" + k + "' must be a number");
        } else {
          *dst = v.get<double>();
        }
      }
    }
  }
  if (j.contains("backend")) {
    const auto b = j["backend"].is_string() ? backend_from_string(j["backend"].get<std::string>()) : std::nullopt;
    if (!b) {
      p.push_back("'backend' must be one of llm, replay, offline");
    } else {
      c.backend = *b;
    }
  }
  if (j.contains("guidance_backend")) {
    const auto& g = j["guidance_backend"];
    if (g == "rule_based") {
      c.guidance_backend = GuidanceBackend::rule_based;
    } else if (g == "llm") {
      c.guidance_backend = GuidanceBackend::llm;
    } else {
      p.push_back("'guidance_backend' must be rule_based or llm");
    }
  }
  if (j.contains("fallback")) {
    const auto& f = j["fallback"];
    if (f == "abort") {
      c.fallback = FallbackPolicy::abort;
    } else if (f == "offline_mutation") {
      c.fallback = FallbackPolicy::offline_mutation;
    } else {
      p.push_back("'fallback' must be abort or offline_mutation");
    }
  }
  for (auto& x : validate_config(c)) p.push_back(std::move(x));
  if (!p.empty()) throw ConfigValidationError(std::move(p));
  return c;
}

struct RoundReport {
  int t = 0;
  std::string generator;  // backend that produced the candidates
  std::vector<StrategySpec> candidates;
  std::vector<StrategyResult> results;  // aligned with candidates
  std::vector<Rejection> rejections;
  std::optional<GuidanceReport> guidance;
  TokenUsage token_usage;
  std::vector<std::string> events;  // fallbacks and retries
  bool barren = false;
  double best_q_so_far = 0.0;
};

inline nlohmann::json round_to_json(const RoundReport& r) {
  nlohmann::json cands = nlohmann::json::array();
  for (std::size_t i = 0; i < r.candidates.size(); ++i) {
    nlohmann::json c = r.candidates[i];
    c["result"] = r.results[i];
    cands.push_back(std::move(c));
  }
  nlohmann::json j = {{"t", r.t},
                      {"generator", r.generator},
                      {"barren", r.barren},
                      {"candidates", cands},
                      {"rejections", r.rejections},
                      {"token_usage", r.token_usage},
                      {"events", r.events},
                      {"best_q_so_far", r.best_q_so_far},
                      {"guidance", nullptr}};
  if (r.guidance) j["guidance"] = *r.guidance;
  return j;
}

struct LoopResult {
  StrategyLibrary library;
  std::vector<RoundReport> rounds;
  TokenUsage usage;
};

class LoopAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

using RoundCallback = std::function<void(const RoundReport&, const StrategyLibrary&)>;

/// Runs `config.rounds` rounds after the last round in `initial`. The
/// transport is required for the llm and replay backends and for llm
/// guidance.
inline LoopResult run_loop(const Dataset& ds, const LoopConfig& config, ChatTransport* transport = nullptr,
                           StrategyLibrary initial = {}, const RoundCallback& on_round = {}) {
  if (auto problems = validate_config(config); !problems.empty()) throw ConfigValidationError(problems);
  const bool networked = config.backend != BackendKind::offline_mutation;
  if ((networked || (config.guidance_enabled && config.guidance_backend == GuidanceBackend::llm)) &&
      !transport) {
    throw ConfigValidationError({"a chat transport is required for this backend"});
  }
  validate_dataset(ds);

  LoopResult out;
  out.library = std::move(initial);
  std::optional<GuidanceReport> previous_guidance;
  const int first = out.library.max_round() + 1;

  auto chat = [&](const std::string& system, const std::string& user, RoundReport& rep) {
    const std::size_t events_before = transport->events().size();
    ChatResponse r = transport->complete({config.model, config.temperature, {{"system", system}, {"user", user}}});
    rep.token_usage += r.usage;
    for (std::size_t i = events_before; i < transport->events().size(); ++i) rep.events.push_back(transport->events()[i]);
    return r;
  };

  for (int t = first; t < first + config.rounds; ++t) {
    RoundReport rep;
    rep.t = t;
    const ContextWindow context = select_context(out.library, config.window);
    const std::uint64_t round_seed = detail::splitmix64(config.seed ^ detail::splitmix64(static_cast<std::uint64_t>(t)));

    // Generation.
    auto offline = [&] {
      rep.generator = "offline";
      rep.candidates = offline_mutation_generate(context, round_seed, config.candidates, &out.library);
    };
    if (!networked) {
      offline();
    } else {
      GenerationPromptInput in;
      in.context = context;
      in.guidance = config.guidance_enabled && previous_guidance ? &*previous_guidance : nullptr;
      in.k = config.candidates;
      try {
        const auto reply = chat(kGeneratorSystemPrompt, render_generation_prompt(in), rep);
        rep.generator = std::string(to_string(config.backend));
        auto parsed = parse_generation(reply.text);
        rep.rejections = std::move(parsed.rejections);
        if (!parsed.error.empty()) rep.events.push_back("generation reply rejected: " + parsed.error);
        for (auto& s : parsed.specs) {
          if (rep.candidates.size() == config.candidates) {
            rep.rejections.push_back({s.name, "beyond the per-round candidate limit"});
            continue;
          }
          rep.candidates.push_back(std::move(s));
        }
      } catch (const TransportError& e) {
        if (config.fallback == FallbackPolicy::abort) {
          throw LoopAborted("round " + std::to_string(t) + ": " + e.what());
        }
        rep.events.push_back(std::string("generation transport failed, using offline mutation: ") + e.what());
        offline();
      }
    }
    // Names already archived in this round number cannot occur; names are
    // unique within a round by construction.

    // Evaluation.
    rep.barren = rep.candidates.empty();
    std::vector<RoundCandidate> round;
    if (!rep.barren) {
      rep.results = evaluate_strategies(rep.candidates, ds, config.weights, config.threads);
      for (std::size_t i = 0; i < rep.candidates.size(); ++i) {
        const auto& res = rep.results[i];
        RoundCandidate c;
        c.spec = rep.candidates[i];
        c.r = res.r;
        c.q = res.q;
        c.failed = res.failed || res.not_applicable;
        c.analysis = res.failure_reason;
        round.push_back(std::move(c));
      }
    } else {
      rep.events.push_back("barren round: no valid candidates");
    }

    // Guidance.
    if (config.guidance_enabled) {
      std::optional<GuidanceReport> g;
      if (config.guidance_backend == GuidanceBackend::llm && !round.empty()) {
        std::vector<std::string> names;
        for (const auto& c : round) names.push_back(c.spec.name);
        try {
          const auto reply = chat(kGuidanceSystemPrompt, render_guidance_prompt(round), rep);
          const auto j = extract_json_with_key(reply.text, "ranking");
          if (!j) throw GuidanceError("no JSON guidance payload in response");
          g = parse_guidance(*j, names);
        } catch (const TransportError& e) {
          rep.events.push_back(std::string("guidance transport failed, using rule-based guidance: ") + e.what());
        } catch (const GuidanceError& e) {
          rep.events.push_back(std::string("guidance reply rejected, using rule-based guidance: ") + e.what());
        }
      }
      if (!g) g = rule_based_guidance(round);
      for (auto& c : round) {
        for (const auto& e : g->ranking) {
          if (e.name == c.spec.name && !e.comment.empty()) {
            c.analysis = c.analysis.empty() ? e.comment : c.analysis + "; " + e.comment;
          }
        }
      }
      rep.guidance = g;
      previous_guidance = std::move(g);
    }

    // Archive.
    out.library.insert(categorize(round, t));
    rep.best_q_so_far = out.library.best_q().value_or(0.0);
    out.usage += rep.token_usage;
    if (on_round) on_round(rep, out.library);
    out.rounds.push_back(std::move(rep));
  }
  return out;
}

}  // namespace logitmia
