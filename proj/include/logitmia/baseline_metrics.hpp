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

/// @file baseline_metrics.hpp
/// @brief Handcrafted logits-level membership metrics.
///
/// Every metric consumes an EvalContext (64-bit probabilities, log-probs and
/// true-token gathers) and returns a typed Score. Metrics report raw values;
/// orientation toward members is applied by the evaluation engine using the
/// strategy's declared Direction.
///
/// Target-based metrics return ScoreStatus::not_applicable on slices that
/// carry no ground-truth ids (image positions).
///
/// The modified Rényi family for alpha != 1 uses, per position with
/// c = |1 - alpha|,
///
///     -(1/c) * [ (1 - p_y) (p_y^c - 1) + sum_{j != y} p_j ((1 - p_j)^c - 1) ]
///
/// which tends to the modified Shannon entropy
/// -(1 - p_y) log p_y - sum_{j != y} p_j log(1 - p_j) as alpha -> 1.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "logitmia/strategy.hpp"

namespace logitmia {

struct PoolingRule {
  enum class Kind { min_k, max_k, mean, single_min, single_max };
  Kind kind = Kind::mean;
  double k_percent = 0.0;
};

/// Number of positions selected by a k% pool over n values:
/// max(1, floor(k/100 * n)).
inline std::size_t selection_count(double k_percent, std::size_t n) {
  if (n == 0) return 0;
  const double raw = std::floor(k_percent * static_cast<double>(n) / 100.0 + 1e-9);
  const auto m = static_cast<std::size_t>(std::max(1.0, raw));
  return std::min(m, n);
}

/// Mean of the `m` values that order first under `comp`, found by partial
/// selection (no full sort).
template <class T, class Compare>
double select_mean(std::vector<T> values, std::size_t m, Compare comp) {
  if (values.empty() || m == 0) return 0.0;
  m = std::min(m, values.size());
  if (m < values.size()) {
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(m), values.end(),
                     comp);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) sum += static_cast<double>(values[i]);
  return sum / static_cast<double>(m);
}

inline double pool(std::span<const double> values, const PoolingRule& rule) {
  const std::vector<double> v(values.begin(), values.end());
  switch (rule.kind) {
    case PoolingRule::Kind::min_k:
      return select_mean(v, selection_count(rule.k_percent, v.size()), std::less<>{});
    case PoolingRule::Kind::max_k:
      return select_mean(v, selection_count(rule.k_percent, v.size()), std::greater<>{});
    case PoolingRule::Kind::mean:
      return select_mean(v, v.size(), std::less<>{});
    case PoolingRule::Kind::single_min:
      return select_mean(v, 1, std::less<>{});
    case PoolingRule::Kind::single_max:
      return select_mean(v, 1, std::greater<>{});
  }
  return 0.0;
}

/// Largest and second-largest entries in one pass. `comp` is exposed so the
/// comparison count can be observed.
template <class T, class Compare = std::less<>>
std::pair<T, T> top_two(std::span<const T> row, Compare comp = {}) {
  T first = std::numeric_limits<T>::lowest();
  T second = std::numeric_limits<T>::lowest();
  for (const T& x : row) {
    if (comp(first, x)) {
      second = first;
      first = x;
    } else if (comp(second, x)) {
      second = x;
    }
  }
  return {first, second};
}

inline double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// ---------------------------------------------------------------------------
// Metrics

inline Score perplexity(const EvalContext& ctx) {
  if (!ctx.targets_valid) return Score::not_applicable();
  if (ctx.positions() == 0) return Score::insufficient();
  return Score::of(std::exp(-mean_of(ctx.true_log_probs)));
}

inline Score max_prob_gap(const EvalContext& ctx) {
  if (ctx.vocab() < 2) throw std::invalid_argument("max_prob_gap needs a vocabulary of at least 2");
  if (ctx.positions() == 0) return Score::insufficient();
  double sum = 0.0;
  for (std::size_t i = 0; i < ctx.positions(); ++i) {
    const auto [hi, next] = top_two(ctx.dist.log_prob_row(i));
    sum += hi - next;
  }
  return Score::of(sum / static_cast<double>(ctx.positions()));
}

inline Score min_k_prob(const EvalContext& ctx, double k_percent) {
  if (!ctx.targets_valid) return Score::not_applicable();
  if (ctx.positions() == 0) return Score::insufficient();
  return Score::of(pool(ctx.true_log_probs, {PoolingRule::Kind::min_k, k_percent}));
}

inline bool is_supported_renyi_order(double alpha) {
  return alpha == 0.5 || alpha == 1.0 || alpha == 2.0 || std::isinf(alpha);
}

/// Rényi entropy of one distribution given its log-probabilities.
inline double renyi_entropy(std::span<const double> probs, std::span<const double> log_probs,
                            double alpha) {
  if (alpha == 1.0) {
    double h = 0.0;
    for (std::size_t j = 0; j < probs.size(); ++j) {
      if (probs[j] > 0.0) h -= probs[j] * log_probs[j];
    }
    return h;
  }
  const double hi = *std::max_element(log_probs.begin(), log_probs.end());
  if (std::isinf(alpha)) return -hi;
  // log sum_j p_j^alpha, evaluated in the log domain
  double s = 0.0;
  for (double lp : log_probs) s += std::exp(alpha * (lp - hi));
  return (alpha * hi + std::log(s)) / (1.0 - alpha);
}

inline Score renyi_entropy_metric(const EvalContext& ctx, double alpha, const PoolingRule& rule) {
  if (!is_supported_renyi_order(alpha)) {
    throw std::invalid_argument("unsupported Renyi order " + std::to_string(alpha));
  }
  if (ctx.positions() == 0) return Score::insufficient();
  std::vector<double> per_token(ctx.positions());
  for (std::size_t i = 0; i < ctx.positions(); ++i) {
    per_token[i] = renyi_entropy(ctx.dist.prob_row(i), ctx.dist.log_prob_row(i), alpha);
  }
  return Score::of(pool(per_token, rule));
}

inline double modified_renyi_entropy(std::span<const double> probs, std::span<const double> log_probs,
                                     std::size_t y, double alpha) {
  const double py = probs[y];
  if (alpha == 1.0) {
    double h = -(1.0 - py) * log_probs[y];
    for (std::size_t j = 0; j < probs.size(); ++j) {
      if (j != y && probs[j] > 0.0) h -= probs[j] * std::log1p(-probs[j]);
    }
    return h;
  }
  const double c = std::abs(1.0 - alpha);
  double acc = (1.0 - py) * (std::pow(py, c) - 1.0);
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (j != y) acc += probs[j] * (std::pow(1.0 - probs[j], c) - 1.0);
  }
  return -acc / c;
}

inline Score mod_renyi_metric(const EvalContext& ctx, double alpha) {
  if (alpha != 0.5 && alpha != 1.0 && alpha != 2.0) {
    throw std::invalid_argument("unsupported modified Renyi order " + std::to_string(alpha));
  }
  if (!ctx.targets_valid) return Score::not_applicable();
  if (ctx.positions() == 0) return Score::insufficient();
  double sum = 0.0;
  for (std::size_t i = 0; i < ctx.positions(); ++i) {
    sum += modified_renyi_entropy(ctx.dist.prob_row(i), ctx.dist.log_prob_row(i), ctx.target(i),
                                  alpha);
  }
  return Score::of(sum / static_cast<double>(ctx.positions()));
}

/// Mean positive gap between the most confident log-prob and the true-token
/// log-prob. Lower for members.
inline Score avg_true_max_log_gap(const EvalContext& ctx) {
  if (!ctx.targets_valid) return Score::not_applicable();
  if (ctx.positions() == 0) return Score::insufficient();
  double sum = 0.0;
  for (std::size_t i = 0; i < ctx.positions(); ++i) {
    const auto row = ctx.dist.log_prob_row(i);
    const double hi = *std::max_element(row.begin(), row.end());
    sum += std::max(0.0, hi - ctx.true_log_probs[i]);
  }
  return Score::of(sum / static_cast<double>(ctx.positions()));
}

inline Score evaluate_native(const NativeMetric& m, const EvalContext& ctx) {
  switch (m.kind) {
    case NativeMetric::Kind::perplexity: return perplexity(ctx);
    case NativeMetric::Kind::max_prob_gap: return max_prob_gap(ctx);
    case NativeMetric::Kind::min_k: return min_k_prob(ctx, m.k_percent);
    case NativeMetric::Kind::renyi:
      return renyi_entropy_metric(ctx, m.alpha, {PoolingRule::Kind::max_k, m.k_percent});
    case NativeMetric::Kind::mod_renyi: return mod_renyi_metric(ctx, m.alpha);
    case NativeMetric::Kind::avg_true_max_log_gap: return avg_true_max_log_gap(ctx);
  }
  return Score::not_applicable();
}

/// Whether a native metric reads the ground-truth ids.
inline bool uses_targets(const NativeMetric& m) {
  return m.kind != NativeMetric::Kind::max_prob_gap && m.kind != NativeMetric::Kind::renyi;
}

// ---------------------------------------------------------------------------
// Registry

namespace detail {

inline std::string format_order(double alpha) {
  if (std::isinf(alpha)) return "inf";
  std::ostringstream os;
  os << alpha;
  return os.str();
}

inline std::string mod_renyi_code(double alpha) {
  if (alpha == 1.0) {
    return "mean(-(1 - TP) * TLP - (sum_v(P * log(1 - P)) - TP * log(1 - TP)))";
  }
  const auto c = format_order(std::abs(1.0 - alpha));
  return "mean(-(1 / " + c + ") * ((1 - TP) * (pow(TP, " + c + ") - 1) + sum_v(P * (pow(1 - P, " +
         c + ") - 1)) - TP * (pow(1 - TP, " + c + ") - 1)))";
}

}  // namespace detail

/// The handcrafted baseline grid: perplexity, max-prob gap, Min-k% for
/// k in {0,10,20}, Rényi entropy for alpha in {0.5,1,2,inf} under Max-k%
/// pooling with k in {0,10,100}, and modified Rényi for alpha in {0.5,1,2}.
inline std::vector<StrategySpec> list_baselines() {
  using K = NativeMetric::Kind;
  std::vector<StrategySpec> out;
  out.push_back({"perplexity", "exp(-(1/N) sum_i log p(y_i))",
                 "Perplexity of the ground-truth continuation.", "exp(-mean(TLP))",
                 Direction::lower_for_members, NativeMetric{K::perplexity, 1.0, 0.0}});
  out.push_back({"max_prob_gap", "(1/N) sum_i (max_j log p_ij - second_j log p_ij)",
                 "Gap between the top two log-probabilities per position.",
                 "mean(max_v(LP) - max2_v(LP))", Direction::higher_for_members,
                 NativeMetric{K::max_prob_gap, 1.0, 0.0}});
  for (int k : {0, 10, 20}) {
    out.push_back({"min_" + std::to_string(k) + "_prob",
                   "mean of the lowest " + std::to_string(k) + "% of log p(y_i)",
                   "Min-k% probability over true-token log-probabilities.",
                   "min_k_mean(TLP, " + std::to_string(k) + ")", Direction::higher_for_members,
                   NativeMetric{K::min_k, 1.0, static_cast<double>(k)}});
  }
  for (double alpha : {0.5, 1.0, 2.0, std::numeric_limits<double>::infinity()}) {
    for (int k : {0, 10, 100}) {
      const auto a = detail::format_order(alpha);
      out.push_back({"renyi_" + a + "_max_" + std::to_string(k),
                     "mean of the largest " + std::to_string(k) + "% of H_" + a + "(p_i)",
                     "Renyi entropy of order " + a + " pooled with Max-" + std::to_string(k) + "%.",
                     "max_k_mean(renyi_v(P, " + a + "), " + std::to_string(k) + ")",
                     Direction::lower_for_members,
                     NativeMetric{K::renyi, alpha, static_cast<double>(k)}});
    }
  }
  for (double alpha : {0.5, 1.0, 2.0}) {
    const auto a = detail::format_order(alpha);
    out.push_back({"mod_renyi_" + a, "mean_i ModH_" + a + "(p_i, y_i)",
                   "Target-aware modified Renyi entropy of order " + a + ".",
                   detail::mod_renyi_code(alpha), Direction::lower_for_members,
                   NativeMetric{K::mod_renyi, alpha, 0.0}});
  }
  return out;
}

}  // namespace logitmia
