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

/// @file evaluation.hpp
/// @brief Turns per-sample scores into (AUC, accuracy, TPR@5%FPR), the
/// composite score Q, and stratified validation/hold-out splits.
///
/// Decisions use the strict rule "score > tau" on oriented scores (members
/// high). Orientation comes from the strategy's declared direction and is
/// never inferred from the data, so a wrongly declared direction shows up as
/// AUC < 0.5.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "logitmia/baseline_metrics.hpp"
#include "logitmia/dsl.hpp"
#include "logitmia/logits_store.hpp"
#include "logitmia/strategy.hpp"

namespace logitmia {

struct ScoreSet {
  std::vector<double> member_scores;
  std::vector<double> nonmember_scores;
  Direction direction = Direction::higher_for_members;
};

struct EvalTuple {
  double auc = 0.0;
  double acc = 0.0;
  double tpr_at_5fpr = 0.0;

  friend bool operator==(const EvalTuple&, const EvalTuple&) = default;
};

struct Weights {
  double w_auc = 0.6;
  double w_acc = 0.3;
  double w_tpr = 0.1;
};

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Negates lower-for-members scores so that members score high.
inline ScoreSet orient(ScoreSet s) {
  if (s.direction == Direction::lower_for_members) {
    for (double& x : s.member_scores) x = -x;
    for (double& x : s.nonmember_scores) x = -x;
    s.direction = Direction::higher_for_members;
  }
  return s;
}

namespace detail {

inline void require_both_classes(const ScoreSet& s) {
  if (s.member_scores.empty() || s.nonmember_scores.empty()) {
    throw EvaluationError("score set needs at least one member and one non-member");
  }
}

/// Operating points of the "score > tau" rule, from the highest threshold
/// (nothing flagged) down to the lowest (everything flagged).
struct OperatingPoint {
  double tau;
  std::size_t tp;
  std::size_t fp;
};

inline std::vector<OperatingPoint> operating_points(const ScoreSet& oriented) {
  std::vector<std::pair<double, bool>> all;
  all.reserve(oriented.member_scores.size() + oriented.nonmember_scores.size());
  for (double x : oriented.member_scores) all.emplace_back(x, true);
  for (double x : oriented.nonmember_scores) all.emplace_back(x, false);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  std::vector<OperatingPoint> points;
  points.push_back({std::nextafter(all.front().first, std::numeric_limits<double>::infinity()), 0, 0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < all.size();) {
    const double v = all[i].first;
    for (; i < all.size() && all[i].first == v; ++i) (all[i].second ? tp : fp)++;
    const double tau = i < all.size() ? v / 2.0 + all[i].first / 2.0
                                      : std::nextafter(v, -std::numeric_limits<double>::infinity());
    points.push_back({tau, tp, fp});
  }
  return points;
}

}  // namespace detail

/// Mann-Whitney AUC: (wins + 0.5 ties) / (n_m n_n) over member/non-member
/// pairs, counted with a sorted merge.
inline double roc_auc(const ScoreSet& scores) {
  const ScoreSet s = orient(scores);
  detail::require_both_classes(s);
  std::vector<double> non = s.nonmember_scores;
  std::sort(non.begin(), non.end());
  std::uint64_t wins = 0, ties = 0;
  for (double m : s.member_scores) {
    const auto lo = std::lower_bound(non.begin(), non.end(), m);
    const auto hi = std::upper_bound(lo, non.end(), m);
    wins += static_cast<std::uint64_t>(lo - non.begin());
    ties += static_cast<std::uint64_t>(hi - lo);
  }
  const double pairs = static_cast<double>(s.member_scores.size()) *
                       static_cast<double>(s.nonmember_scores.size());
  return (static_cast<double>(wins) + 0.5 * static_cast<double>(ties)) / pairs;
}

struct YoudenResult {
  double acc = 0.0;
  double tau = 0.0;
};

/// Accuracy at the threshold maximizing TPR - FPR; ties go to the larger
/// threshold.
inline YoudenResult accuracy_youden(const ScoreSet& scores) {
  const ScoreSet s = orient(scores);
  detail::require_both_classes(s);
  const double nm = static_cast<double>(s.member_scores.size());
  const double nn = static_cast<double>(s.nonmember_scores.size());
  double best_j = -2.0;
  YoudenResult best;
  for (const auto& p : detail::operating_points(s)) {
    const double j = static_cast<double>(p.tp) / nm - static_cast<double>(p.fp) / nn;
    if (j > best_j) {
      best_j = j;
      best.tau = p.tau;
      best.acc = (static_cast<double>(p.tp) + (nn - static_cast<double>(p.fp))) / (nm + nn);
    }
  }
  return best;
}

/// Largest empirical TPR over thresholds whose FPR does not exceed `fpr_cap`.
/// No interpolation between operating points.
inline double tpr_at_fpr(const ScoreSet& scores, double fpr_cap = 0.05) {
  const ScoreSet s = orient(scores);
  detail::require_both_classes(s);
  const double nm = static_cast<double>(s.member_scores.size());
  const double nn = static_cast<double>(s.nonmember_scores.size());
  double best = 0.0;
  for (const auto& p : detail::operating_points(s)) {
    if (static_cast<double>(p.fp) / nn <= fpr_cap + 1e-12) {
      best = std::max(best, static_cast<double>(p.tp) / nm);
    }
  }
  return best;
}

struct RocPoint {
  double fpr;
  double tpr;
};

/// Empirical ROC curve from (0,0) to (1,1).
inline std::vector<RocPoint> roc_curve(const ScoreSet& scores) {
  const ScoreSet s = orient(scores);
  detail::require_both_classes(s);
  const double nm = static_cast<double>(s.member_scores.size());
  const double nn = static_cast<double>(s.nonmember_scores.size());
  std::vector<RocPoint> out;
  for (const auto& p : detail::operating_points(s)) {
    out.push_back({static_cast<double>(p.fp) / nn, static_cast<double>(p.tp) / nm});
  }
  return out;
}

inline double composite_q(const EvalTuple& r, const Weights& w = {}) {
  return w.w_auc * r.auc + w.w_acc * r.acc + w.w_tpr * r.tpr_at_5fpr;
}

inline EvalTuple evaluate_scores(const ScoreSet& scores) {
  return {roc_auc(scores), accuracy_youden(scores).acc, tpr_at_fpr(scores, 0.05)};
}

// ---------------------------------------------------------------------------
// Strategy evaluation

/// A strategy ready to score records: the native metric when one is set,
/// otherwise its compiled DSL program.
class CompiledStrategy {
 public:
  explicit CompiledStrategy(StrategySpec spec) : spec_(std::move(spec)) {
    if (!spec_.native) program_ = dsl::compile(spec_.code);
  }

  const StrategySpec& spec() const { return spec_; }
  const std::optional<dsl::Program>& program() const { return program_; }

  Score score(const EvalContext& ctx) const {
    if (spec_.native) return evaluate_native(*spec_.native, ctx);
    return dsl::evaluate(*program_, ctx);
  }

  bool uses_targets() const {
    return spec_.native ? logitmia::uses_targets(*spec_.native) : program_->uses_targets;
  }

 private:
  StrategySpec spec_;
  std::optional<dsl::Program> program_;
};

/// Fraction of records that may fail with non-finite scores before the
/// strategy as a whole is marked failed.
inline constexpr double kMaxNonFiniteFraction = 0.10;

struct StrategyResult {
  std::string name;
  EvalTuple r;
  double q = 0.0;
  bool failed = false;
  bool not_applicable = false;
  std::string failure_reason;
  std::size_t n_member = 0;
  std::size_t n_nonmember = 0;
  std::size_t non_finite = 0;
  std::size_t insufficient = 0;
  ScoreSet scores;  // raw (unoriented) usable scores
};

inline void to_json(nlohmann::json& j, const StrategyResult& r) {
  j = nlohmann::json{{"name", r.name},
                     {"auc", r.r.auc},
                     {"accuracy", r.r.acc},
                     {"tpr_at_5_fpr", r.r.tpr_at_5fpr},
                     {"q", r.q},
                     {"failed", r.failed},
                     {"not_applicable", r.not_applicable},
                     {"n_member", r.n_member},
                     {"n_nonmember", r.n_nonmember}};
  if (!r.failure_reason.empty()) j["failure_reason"] = r.failure_reason;
}

/// Scores every record with every strategy. Distributions are derived once
/// per record and shared across strategies. Records are split across
/// `threads` workers; results are written by index so the output does not
/// depend on the thread count.
inline std::vector<std::vector<Score>> score_records(const std::vector<CompiledStrategy>& strategies,
                                                     const Dataset& ds, unsigned threads = 0) {
  std::vector<std::vector<Score>> out(strategies.size(), std::vector<Score>(ds.records.size()));
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      const EvalContext ctx = make_context(ds.records[r]);
      for (std::size_t s = 0; s < strategies.size(); ++s) out[s][r] = strategies[s].score(ctx);
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, ds.records.size())));
  if (threads <= 1) {
    work(0, ds.records.size());
    return out;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (ds.records.size() + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t b = t * chunk;
    const std::size_t e = std::min(ds.records.size(), b + chunk);
    if (b < e) pool.emplace_back(work, b, e);
  }
  for (auto& th : pool) th.join();
  return out;
}

inline StrategyResult summarize_scores(const StrategySpec& spec, const std::vector<Score>& per_record,
                                       const Dataset& ds, const Weights& w) {
  StrategyResult res;
  res.name = spec.name;
  res.scores.direction = spec.direction;
  for (std::size_t i = 0; i < per_record.size(); ++i) {
    const Score& s = per_record[i];
    switch (s.status) {
      case ScoreStatus::not_applicable: res.not_applicable = true; break;
      case ScoreStatus::non_finite: ++res.non_finite; break;
      case ScoreStatus::insufficient_positions: ++res.insufficient; [[fallthrough]];
      case ScoreStatus::ok:
        (ds.records[i].is_member() ? res.scores.member_scores : res.scores.nonmember_scores)
            .push_back(s.value);
        break;
    }
  }
  res.n_member = res.scores.member_scores.size();
  res.n_nonmember = res.scores.nonmember_scores.size();
  if (res.not_applicable) {
    res.failure_reason = "not applicable to slices without ground-truth ids";
    return res;
  }
  if (static_cast<double>(res.non_finite) >
      kMaxNonFiniteFraction * static_cast<double>(per_record.size())) {
    res.failed = true;
    res.failure_reason = std::to_string(res.non_finite) + " of " +
                         std::to_string(per_record.size()) + " records produced non-finite scores";
    return res;
  }
  if (res.n_member == 0 || res.n_nonmember == 0) {
    res.failed = true;
    res.failure_reason = "no usable scores for one of the classes";
    return res;
  }
  res.r = evaluate_scores(res.scores);
  res.q = composite_q(res.r, w);
  return res;
}

/// Evaluates a batch of strategies. Strategies that do not compile are
/// returned as failed results rather than thrown.
inline std::vector<StrategyResult> evaluate_strategies(const std::vector<StrategySpec>& specs,
                                                       const Dataset& ds, const Weights& w = {},
                                                       unsigned threads = 0) {
  if (ds.member_count() == 0 || ds.nonmember_count() == 0) {
    throw EvaluationError("dataset needs at least one member and one non-member");
  }
  std::vector<CompiledStrategy> compiled;
  std::vector<std::optional<std::string>> compile_errors(specs.size());
  std::vector<std::size_t> slot(specs.size(), SIZE_MAX);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    try {
      compiled.emplace_back(specs[i]);
      slot[i] = compiled.size() - 1;
    } catch (const std::exception& e) {
      compile_errors[i] = e.what();
    }
  }
  const auto scores = score_records(compiled, ds, threads);
  std::vector<StrategyResult> out;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (compile_errors[i]) {
      StrategyResult r;
      r.name = specs[i].name;
      r.failed = true;
      r.failure_reason = *compile_errors[i];
      out.push_back(std::move(r));
      continue;
    }
    out.push_back(summarize_scores(specs[i], scores[slot[i]], ds, w));
  }
  return out;
}

inline StrategyResult evaluate_strategy(const StrategySpec& spec, const Dataset& ds,
                                        const Weights& w = {}) {
  return evaluate_strategies({spec}, ds, w).front();
}

// ---------------------------------------------------------------------------
// Splits

/// Stratified split into (validation, holdout). Each class contributes
/// floor(fraction * n) records to validation, clamped to [1, n - 1].
/// Deterministic under `seed`; original record order is kept inside each
/// part.
inline std::pair<Dataset, Dataset> split_holdout(const Dataset& ds, double fraction,
                                                 std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw EvaluationError("fraction must lie in (0, 1)");
  if (ds.member_count() < 2 || ds.nonmember_count() < 2) {
    throw EvaluationError("split needs at least two members and two non-members");
  }
  std::mt19937_64 rng(seed);
  std::vector<bool> to_validation(ds.records.size(), false);
  for (std::uint8_t label : {std::uint8_t{1}, std::uint8_t{0}}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
      if (ds.records[i].label == label) idx.push_back(i);
    }
    // Fisher-Yates with a fixed reduction so the permutation is identical
    // across standard library implementations.
    for (std::size_t i = idx.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(idx[i - 1], idx[j]);
    }
    auto take = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(idx.size())));
    take = std::clamp<std::size_t>(take, 1, idx.size() - 1);
    for (std::size_t i = 0; i < take; ++i) to_validation[idx[i]] = true;
  }
  Dataset val, hold;
  val.vocab_size = hold.vocab_size = ds.vocab_size;
  val.provenance = ds.provenance + " [validation split]";
  hold.provenance = ds.provenance + " [holdout split]";
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    (to_validation[i] ? val : hold).records.push_back(ds.records[i]);
  }
  return {std::move(val), std::move(hold)};
}

}  // namespace logitmia
