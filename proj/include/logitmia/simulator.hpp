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

// Controlled memorization testbed: standard-normal logits with an additive
// boost on the ground-truth token for members.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

#include "logitmia/evaluation.hpp"
#include "logitmia/logits_store.hpp"
#include "logitmia/strategy.hpp"

namespace logitmia {

struct SimConfig {
  std::size_t n_member = 500;
  std::size_t n_nonmember = 500;
  std::size_t vocab = 1000;
  std::size_t seq_len = 64;
  double delta = 0.0;
  std::uint64_t seed = 0;

  std::size_t size() const { return n_member + n_nonmember; }
};

inline void to_json(nlohmann::json& j, const SimConfig& c) {
  j = nlohmann::json{{"n_member", c.n_member}, {"n_nonmember", c.n_nonmember}, {"vocab", c.vocab},
                     {"seq_len", c.seq_len},   {"delta", c.delta},             {"seed", c.seed}};
}

inline void validate_sim_config(const SimConfig& c) {
  std::vector<std::string> p;
  if (c.n_member == 0) p.push_back("n_member must be positive");
  if (c.n_nonmember == 0) p.push_back("n_nonmember must be positive");
  if (c.vocab < 2) p.push_back("vocab must be at least 2");
  if (c.seq_len == 0) p.push_back("seq_len must be positive");
  if (!(c.delta >= 0.0) || !std::isfinite(c.delta)) p.push_back("delta must be finite and >= 0");
  if (!p.empty()) {
    std::string s = "invalid simulation config:";
    for (const auto& x : p) s += " " + x + ";";
    throw std::invalid_argument(s);
  }
}

inline void from_json(const nlohmann::json& j, SimConfig& c) {
  c.n_member = j.value("n_member", c.n_member);
  c.n_nonmember = j.value("n_nonmember", c.n_nonmember);
  c.vocab = j.value("vocab", c.vocab);
  c.seq_len = j.value("seq_len", c.seq_len);
  c.delta = j.value("delta", c.delta);
  c.seed = j.value("seed", c.seed);
}

namespace detail {

/// Standard normals by the Marsaglia polar method over a 64-bit Mersenne
/// Twister; fixed arithmetic so streams match across standard libraries.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : rng_(seed) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * unit() - 1.0;
      v = 2.0 * unit() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  std::uint64_t bits() { return rng_(); }

 private:
  // Uniform on (0, 1).
  double unit() { return (static_cast<double>(rng_() >> 11) + 0.5) * 0x1.0p-53; }

  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Record `index` of the simulated dataset. Indices below n_member are
/// members. Each record has its own stream keyed by (seed, index), so any
/// subset can be generated independently.
inline LogitsRecord simulate_record(const SimConfig& cfg, std::size_t index) {
  detail::NormalStream stream(detail::mix64(cfg.seed ^ detail::mix64(index)));
  LogitsRecord r;
  r.label = index < cfg.n_member ? 1 : 0;
  r.slice = Slice::text;
  r.vocab_size = cfg.vocab;
  char id[32];
  std::snprintf(id, sizeof id, "sim_%06zu", index);
  r.sample_id = id;
  r.targets.resize(cfg.seq_len);
  for (auto& y : r.targets) y = static_cast<std::uint32_t>(stream.bits() % cfg.vocab);
  r.logits.resize(cfg.seq_len * cfg.vocab);
  for (auto& z : r.logits) z = static_cast<float>(stream.next());
  if (r.label == 1) {
    for (std::size_t i = 0; i < cfg.seq_len; ++i) {
      r.logits[i * cfg.vocab + r.targets[i]] += static_cast<float>(cfg.delta);
    }
  }
  return r;
}

inline Dataset simulate_dataset(const SimConfig& cfg) {
  validate_sim_config(cfg);
  Dataset ds;
  ds.vocab_size = cfg.vocab;
  ds.provenance = "simulated: n_member=" + std::to_string(cfg.n_member) +
                  " n_nonmember=" + std::to_string(cfg.n_nonmember) + " V=" + std::to_string(cfg.vocab) +
                  " N=" + std::to_string(cfg.seq_len) + " seed=" + std::to_string(cfg.seed);
  ds.records.reserve(cfg.size());
  for (std::size_t i = 0; i < cfg.size(); ++i) ds.records.push_back(simulate_record(cfg, i));
  return ds;
}

/// The average positive gap between the top log-probability and the true
/// token's log-probability; members score lower.
inline StrategySpec gap_strategy() {
  StrategySpec s;
  s.name = "avg_true_max_log_gap";
  s.formula = "(1/N) sum_i max(0, max_j log p(j|i) - log p(y_i|i))";
  s.description = "average positive gap between the most confident token and the true token";
  s.code = "mean(relu(max_v(LP) - TLP))";
  s.direction = Direction::lower_for_members;
  s.native = NativeMetric{NativeMetric::Kind::avg_true_max_log_gap, 0.0, 0.0};
  return s;
}

/// Scores every simulated record without materializing the dataset.
/// Deterministic regardless of `threads`.
inline ScoreSet score_simulated(const SimConfig& cfg, const StrategySpec& spec, unsigned threads = 0) {
  validate_sim_config(cfg);
  const CompiledStrategy strategy(spec);
  std::vector<double> scores(cfg.size());
  std::vector<char> ok(cfg.size(), 0);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Score s = strategy.score(make_context(simulate_record(cfg, i)));
      scores[i] = s.value;
      ok[i] = s.usable();
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  if (threads == 1) {
    work(0, cfg.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (cfg.size() + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t b = t * chunk, e = std::min(cfg.size(), b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }
  ScoreSet set;
  set.direction = spec.direction;
  for (std::size_t i = 0; i < cfg.size(); ++i) {
    if (!ok[i]) continue;
    (i < cfg.n_member ? set.member_scores : set.nonmember_scores).push_back(scores[i]);
  }
  return set;
}

struct SeparationStats {
  double auc = 0.5;
  std::optional<double> cohens_d;  // absent when both classes are constant
  std::optional<double> welch_p;
  double member_mean = 0.0;
  double nonmember_mean = 0.0;
  std::string note;
};

namespace detail {

inline std::pair<double, double> mean_and_var(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, v.size() > 1 ? ss / static_cast<double>(v.size() - 1) : 0.0};
}

}  // namespace detail

/// AUC under the declared direction, Cohen's d with pooled SD, and the
/// two-sided Welch t-test p-value, all on raw (unoriented) scores.
inline SeparationStats separation(const ScoreSet& scores) {
  if (scores.member_scores.empty() || scores.nonmember_scores.empty()) {
    throw EvaluationError("separation needs scores for both classes");
  }
  SeparationStats st;
  st.auc = roc_auc(scores);
  const auto [m1, v1] = detail::mean_and_var(scores.member_scores);
  const auto [m2, v2] = detail::mean_and_var(scores.nonmember_scores);
  st.member_mean = m1;
  st.nonmember_mean = m2;
  const double n1 = static_cast<double>(scores.member_scores.size());
  const double n2 = static_cast<double>(scores.nonmember_scores.size());
  if (v1 == 0.0 && v2 == 0.0) {
    st.note = "both classes have zero variance; effect size undefined";
    return st;
  }
  if (n1 + n2 > 2) {
    const double pooled = std::sqrt(((n1 - 1) * v1 + (n2 - 1) * v2) / (n1 + n2 - 2));
    if (pooled > 0) st.cohens_d = (m1 - m2) / pooled;
  }
  const double a = v1 / n1, b = v2 / n2;
  const double se = std::sqrt(a + b);
  if (se > 0 && n1 > 1 && n2 > 1) {
    const double t = (m1 - m2) / se;
    const double df = (a + b) * (a + b) / (a * a / (n1 - 1) + b * b / (n2 - 1));
    const boost::math::students_t dist(df);
    st.welch_p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
  }
  return st;
}

inline nlohmann::json separation_to_json(const SeparationStats& s, const std::string& metric, double delta) {
  nlohmann::json j = {{"metric", metric}, {"auc", s.auc}, {"delta", delta},
                      {"member_mean", s.member_mean}, {"nonmember_mean", s.nonmember_mean}};
  j["cohens_d"] = s.cohens_d ? nlohmann::json(*s.cohens_d) : nlohmann::json(nullptr);
  j["welch_p"] = s.welch_p ? nlohmann::json(*s.welch_p) : nlohmann::json(nullptr);
  if (!s.note.empty()) j["note"] = s.note;
  return j;
}

struct CalibrationOptions {
  double lo = 0.0;
  double hi = 10.0;
  double tolerance = 0.01;
  int max_iterations = 40;
  unsigned threads = 0;
};

struct CalibrationResult {
  double delta = 0.0;
  double auc = 0.5;
  std::vector<std::pair<double, double>> trace;  // (delta, auc) in evaluation order
  bool clamped = false;
  bool monotone = true;
  std::string warning;
};

inline nlohmann::json calibration_to_json(const CalibrationResult& c, double target, const SimConfig& cfg) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& [d, a] : c.trace) trace.push_back({{"delta", d}, {"auc", a}});
  nlohmann::json j = {{"target_auc", target}, {"delta", c.delta},     {"auc", c.auc},
                      {"clamped", c.clamped},  {"monotone", c.monotone}, {"trace", trace},
                      {"config", cfg}};
  if (!c.warning.empty()) j["warning"] = c.warning;
  return j;
}

/// Bisection on delta for the gap metric's AUC. All evaluations share the
/// base noise (same seed), so member gaps shrink monotonically with delta.
inline CalibrationResult calibrate_delta(double target_auc, SimConfig cfg, const CalibrationOptions& opt = {}) {
  const StrategySpec gap = gap_strategy();
  CalibrationResult res;
  auto auc_at = [&](double delta) {
    cfg.delta = delta;
    const double a = roc_auc(score_simulated(cfg, gap, opt.threads));
    res.trace.emplace_back(delta, a);
    return a;
  };
  auto finish = [&](double d, double a) {
    res.delta = d;
    res.auc = a;
    auto sorted = res.trace;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 1; i < sorted.size(); ++i) {
      if (sorted[i].second < sorted[i - 1].second) res.monotone = false;
    }
    if (!res.monotone) res.warning += "AUC trace is not monotone in delta; ";
    return res;
  };

  double lo = opt.lo, hi = opt.hi;
  const double auc_lo = auc_at(lo);
  if (auc_lo >= target_auc - opt.tolerance) {
    if (auc_lo > target_auc + opt.tolerance) {
      res.clamped = true;
      res.warning += "target below the AUC at the bracket bottom; clamped; ";
    }
    return finish(lo, auc_lo);
  }
  const double auc_hi = auc_at(hi);
  if (auc_hi <= target_auc) {
    res.clamped = true;
    res.warning += "target AUC not below the AUC at the bracket top; clamped at the top; ";
    return finish(hi, auc_hi);
  }
  double best_d = hi, best_a = auc_hi;
  for (int it = 0; it < opt.max_iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double a = auc_at(mid);
    if (std::abs(a - target_auc) < std::abs(best_a - target_auc)) {
      best_d = mid;
      best_a = a;
    }
    if (std::abs(a - target_auc) <= opt.tolerance) return finish(mid, a);
    (a < target_auc ? lo : hi) = mid;
  }
  res.warning += "bisection did not reach the tolerance; ";
  return finish(best_d, best_a);
}

}  // namespace logitmia
