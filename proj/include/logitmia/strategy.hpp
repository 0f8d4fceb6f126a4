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

/// @file strategy.hpp
/// @brief Shared vocabulary: score directions, typed per-sample scores,
/// strategy specifications and the per-record evaluation context.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "logitmia/logits_store.hpp"

namespace logitmia {

/// Which side of the score distribution members are expected on.
enum class Direction { higher_for_members, lower_for_members };

inline std::string_view to_string(Direction d) {
  return d == Direction::higher_for_members ? "higher for members" : "lower for members";
}

/// Parses free-text expected behaviour ("higher/lower for members").
inline std::optional<Direction> parse_direction(std::string_view text) {
  const bool higher = text.find("higher") != std::string_view::npos;
  const bool lower = text.find("lower") != std::string_view::npos;
  if (higher == lower) return std::nullopt;
  return higher ? Direction::higher_for_members : Direction::lower_for_members;
}

/// Outcome of scoring one record.
enum class ScoreStatus {
  ok,
  insufficient_positions,  // value is the 0.0 sentinel
  not_applicable,          // target-based metric on a slice without targets
  non_finite,
};

struct Score {
  double value = 0.0;
  ScoreStatus status = ScoreStatus::ok;

  static Score of(double v) {
    return std::isfinite(v) ? Score{v, ScoreStatus::ok} : Score{v, ScoreStatus::non_finite};
  }
  static Score insufficient() { return {0.0, ScoreStatus::insufficient_positions}; }
  static Score not_applicable() { return {0.0, ScoreStatus::not_applicable}; }

  bool usable() const {
    return status == ScoreStatus::ok || status == ScoreStatus::insufficient_positions;
  }
};

/// Identifies one of the natively implemented handcrafted metrics.
struct NativeMetric {
  enum class Kind { perplexity, max_prob_gap, min_k, renyi, mod_renyi, avg_true_max_log_gap };

  Kind kind = Kind::perplexity;
  double alpha = 1.0;      // renyi / mod_renyi
  double k_percent = 0.0;  // min_k, and the max-k pooling of renyi

  friend bool operator==(const NativeMetric&, const NativeMetric&) = default;
};

inline std::string_view to_string(NativeMetric::Kind k) {
  switch (k) {
    case NativeMetric::Kind::perplexity: return "perplexity";
    case NativeMetric::Kind::max_prob_gap: return "max_prob_gap";
    case NativeMetric::Kind::min_k: return "min_k";
    case NativeMetric::Kind::renyi: return "renyi";
    case NativeMetric::Kind::mod_renyi: return "mod_renyi";
    case NativeMetric::Kind::avg_true_max_log_gap: return "avg_true_max_log_gap";
  }
  return "unknown";
}

inline NativeMetric::Kind native_kind_from_string(std::string_view s) {
  for (auto k : {NativeMetric::Kind::perplexity, NativeMetric::Kind::max_prob_gap,
                 NativeMetric::Kind::min_k, NativeMetric::Kind::renyi, NativeMetric::Kind::mod_renyi,
                 NativeMetric::Kind::avg_true_max_log_gap}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown native metric '" + std::string(s) + "'");
}

/// A named membership scoring strategy. `code` is always DSL source; when
/// `native` is set the evaluation engine uses the native implementation and
/// `code` is its DSL re-expression.
struct StrategySpec {
  std::string name;
  std::string formula;
  std::string description;
  std::string code;
  Direction direction = Direction::higher_for_members;
  std::optional<NativeMetric> native;

  friend bool operator==(const StrategySpec&, const StrategySpec&) = default;
};

inline void to_json(nlohmann::json& j, const StrategySpec& s) {
  j = nlohmann::json{{"name", s.name},
                     {"formula", s.formula},
                     {"description", s.description},
                     {"code", s.code},
                     {"expected_behavior", std::string(to_string(s.direction))}};
  if (s.native) {
    // JSON has no infinity; the unbounded order is written as "inf".
    nlohmann::json alpha = s.native->alpha;
    if (std::isinf(s.native->alpha)) alpha = "inf";
    j["native"] = {{"kind", std::string(to_string(s.native->kind))},
                   {"alpha", alpha},
                   {"k_percent", s.native->k_percent}};
  }
}

inline void from_json(const nlohmann::json& j, StrategySpec& s) {
  s.name = j.at("name").get<std::string>();
  s.formula = j.value("formula", "");
  s.description = j.value("description", "");
  s.code = j.at("code").get<std::string>();
  const auto dir = parse_direction(j.at("expected_behavior").get<std::string>());
  if (!dir) throw std::invalid_argument("expected_behavior must say higher or lower for members");
  s.direction = *dir;
  s.native.reset();
  if (j.contains("native") && !j["native"].is_null()) {
    const auto& n = j["native"];
    const auto& a = n.at("alpha");
    const double alpha = a.is_string() && a.get<std::string>() == "inf"
                             ? std::numeric_limits<double>::infinity()
                             : a.get<double>();
    s.native = NativeMetric{native_kind_from_string(n.at("kind").get<std::string>()), alpha,
                            n.at("k_percent").get<double>()};
  }
}

/// Read-only inputs of one record as seen by metrics and DSL programs.
/// TP/TLP are the true-token gathers of P/LP.
struct EvalContext {
  Distributions dist;
  std::vector<double> targets;  // Y, as reals
  std::vector<double> true_probs;
  std::vector<double> true_log_probs;
  bool targets_valid = true;

  std::size_t positions() const { return dist.rows; }
  std::size_t vocab() const { return dist.cols; }
  std::size_t target(std::size_t i) const { return static_cast<std::size_t>(targets[i]); }
};

inline EvalContext make_context(Distributions dist, std::span<const std::uint32_t> targets,
                                bool targets_valid) {
  EvalContext ctx;
  ctx.targets_valid = targets_valid;
  ctx.targets.assign(targets.begin(), targets.end());
  ctx.true_probs.resize(targets.size());
  ctx.true_log_probs.resize(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    ctx.true_probs[i] = dist.prob(i, targets[i]);
    ctx.true_log_probs[i] = dist.log_prob(i, targets[i]);
  }
  ctx.dist = std::move(dist);
  return ctx;
}

inline EvalContext make_context(const LogitsRecord& record) {
  return make_context(derive_distributions(record), record.targets, has_targets(record.slice));
}

}  // namespace logitmia
