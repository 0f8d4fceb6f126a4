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

#include "logitmia/baseline_metrics.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "gtest/gtest.h"
#include "test_util.hpp"

namespace logitmia {
namespace {

using ::logitmia::testing::context_from_probs;
using ::logitmia::testing::make_record;

constexpr double kInf = std::numeric_limits<double>::infinity();

EvalContext uniform_context(std::size_t vocab, std::size_t n) {
  std::vector<std::vector<double>> rows(n, std::vector<double>(vocab, 1.0 / static_cast<double>(vocab)));
  return context_from_probs(rows, std::vector<std::uint32_t>(n, 1));
}

TEST(PerplexityTest, UniformRowsGiveVocabularySize) {
  const auto s = perplexity(uniform_context(4, 5));
  ASSERT_EQ(s.status, ScoreStatus::ok);
  EXPECT_NEAR(s.value, 4.0, 1e-12);
}

TEST(PerplexityTest, CertainTargetsGiveOne) {
  const auto ctx = context_from_probs({{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}}, {0, 1});
  EXPECT_DOUBLE_EQ(perplexity(ctx).value, 1.0);
}

TEST(PerplexityTest, ExactArithmetic) {
  const auto ctx = context_from_probs({{0.5, 0.5}, {0.25, 0.75}}, {0, 0});
  EXPECT_NEAR(perplexity(ctx).value, std::sqrt(8.0), 1e-12);
}

TEST(PerplexityTest, ImageSliceIsNotApplicable) {
  const auto ctx = context_from_probs({{0.5, 0.5}}, {0}, /*targets_valid=*/false);
  EXPECT_EQ(perplexity(ctx).status, ScoreStatus::not_applicable);
  EXPECT_EQ(min_k_prob(ctx, 10).status, ScoreStatus::not_applicable);
  EXPECT_EQ(mod_renyi_metric(ctx, 1.0).status, ScoreStatus::not_applicable);
  EXPECT_EQ(avg_true_max_log_gap(ctx).status, ScoreStatus::not_applicable);
  EXPECT_EQ(max_prob_gap(ctx).status, ScoreStatus::ok);
  EXPECT_EQ(renyi_entropy_metric(ctx, 2.0, {PoolingRule::Kind::mean}).status, ScoreStatus::ok);
}

TEST(MaxProbGapTest, Cases) {
  EXPECT_NEAR(max_prob_gap(uniform_context(5, 3)).value, 0.0, 1e-12);
  const auto one = context_from_probs({{0.7, 0.2, 0.1}}, {0});
  EXPECT_NEAR(max_prob_gap(one).value, std::log(3.5), 1e-12);
  const auto two = context_from_probs({{0.7, 0.2, 0.1}, {1.0 / 3, 1.0 / 3, 1.0 / 3}}, {0, 0});
  EXPECT_NEAR(max_prob_gap(two).value, std::log(3.5) / 2.0, 1e-12);
  EXPECT_THROW(max_prob_gap(context_from_probs({{1.0}}, {0})), std::invalid_argument);
}

TEST(MinKTest, Cases) {
  const auto ctx = context_from_probs(
      {{0.1, 0.9}, {0.5, 0.5}, {0.9, 0.1}, {0.7, 0.3}}, {0, 0, 0, 0});
  EXPECT_NEAR(min_k_prob(ctx, 50).value, (std::log(0.1) + std::log(0.5)) / 2.0, 1e-12);
  EXPECT_NEAR(min_k_prob(ctx, 0).value, std::log(0.1), 1e-12);
  EXPECT_NEAR(min_k_prob(ctx, 100).value,
              (std::log(0.1) + std::log(0.5) + std::log(0.9) + std::log(0.7)) / 4.0, 1e-12);
  const auto flat = context_from_probs({{0.3, 0.7}, {0.3, 0.7}, {0.3, 0.7}}, {0, 0, 0});
  for (double k : {0.0, 10.0, 20.0, 50.0, 100.0}) {
    EXPECT_NEAR(min_k_prob(flat, k).value, std::log(0.3), 1e-12);
  }
}

TEST(SelectionTest, CountRule) {
  EXPECT_EQ(selection_count(0, 20), 1u);
  EXPECT_EQ(selection_count(10, 20), 2u);
  EXPECT_EQ(selection_count(10, 9), 1u);
  EXPECT_EQ(selection_count(20, 16), 3u);
  EXPECT_EQ(selection_count(100, 16), 16u);
  EXPECT_EQ(selection_count(70, 10), 7u);
}

TEST(RenyiTest, OrdersCollapseOnUniformRows) {
  for (double alpha : {0.5, 1.0, 2.0, kInf}) {
    const auto s = renyi_entropy_metric(uniform_context(8, 4), alpha, {PoolingRule::Kind::mean});
    EXPECT_NEAR(s.value, std::log(8.0), 1e-12) << "alpha=" << alpha;
  }
}

TEST(RenyiTest, OneHotIsZero) {
  const auto ctx = context_from_probs({{0.0, 1.0, 0.0, 0.0}}, {1});
  for (double alpha : {0.5, 1.0, 2.0, kInf}) {
    EXPECT_NEAR(renyi_entropy_metric(ctx, alpha, {PoolingRule::Kind::mean}).value, 0.0, 1e-15);
  }
}

TEST(RenyiTest, OrderTwoExact) {
  const auto ctx = context_from_probs({{0.5, 0.5, 0.0, 0.0}}, {0});
  EXPECT_NEAR(renyi_entropy_metric(ctx, 2.0, {PoolingRule::Kind::mean}).value, std::log(2.0), 1e-12);
}

TEST(RenyiTest, MaxKPooling) {
  // per-token Shannon entropies: ln 2, ln 4, 0
  const auto ctx = context_from_probs(
      {{0.5, 0.5, 0.0, 0.0}, {0.25, 0.25, 0.25, 0.25}, {1.0, 0.0, 0.0, 0.0}}, {0, 0, 0});
  const auto max0 = renyi_entropy_metric(ctx, 1.0, {PoolingRule::Kind::max_k, 0});
  const auto max100 = renyi_entropy_metric(ctx, 1.0, {PoolingRule::Kind::max_k, 100});
  EXPECT_NEAR(max0.value, std::log(4.0), 1e-12);
  EXPECT_NEAR(max100.value, (std::log(2.0) + std::log(4.0)) / 3.0, 1e-12);
  EXPECT_THROW(renyi_entropy_metric(ctx, 3.0, {}), std::invalid_argument);
}

// Independent modified Shannon entropy, written straight from its definition
// in extended precision.
double mentr_oracle(const std::vector<double>& p, std::size_t y) {
  long double h = -(1.0L - p[y]) * std::log(static_cast<long double>(p[y]));
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (j != y) h -= p[j] * std::log(1.0L - p[j]);
  }
  return static_cast<double>(h);
}

TEST(ModRenyiTest, Cases) {
  const auto certain = context_from_probs({{0.0, 1.0, 0.0}}, {1});
  for (double alpha : {0.5, 1.0, 2.0}) {
    EXPECT_NEAR(mod_renyi_metric(certain, alpha).value, 0.0, 1e-15);
  }
  const auto half = context_from_probs({{0.5, 0.5}}, {0});
  EXPECT_NEAR(mod_renyi_metric(half, 1.0).value, std::log(2.0), 1e-12);
  EXPECT_THROW(mod_renyi_metric(half, kInf), std::invalid_argument);
}

TEST(ModRenyiTest, OrderOneMatchesOracleOnRandomRecords) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto rec = testing::random_record(rng, 32, 8, 0, 2.5);
    const auto ctx = make_context(rec);
    double oracle = 0.0;
    for (std::size_t i = 0; i < ctx.positions(); ++i) {
      const auto row = ctx.dist.prob_row(i);
      oracle += mentr_oracle({row.begin(), row.end()}, ctx.target(i));
    }
    oracle /= static_cast<double>(ctx.positions());
    const double got = mod_renyi_metric(ctx, 1.0).value;
    EXPECT_NEAR(got, oracle, 1e-10 * std::abs(oracle));
  }
}

TEST(ModRenyiTest, GeneralizationApproachesShannonForm) {
  const std::vector<double> p = {0.6, 0.3, 0.1};
  const std::vector<double> lp = {std::log(0.6), std::log(0.3), std::log(0.1)};
  const double at_one = modified_renyi_entropy(p, lp, 1, 1.0);
  EXPECT_NEAR(at_one, mentr_oracle(p, 1), 1e-14);
  EXPECT_NEAR(modified_renyi_entropy(p, lp, 1, 1.0 + 1e-7), at_one, 1e-6);
  EXPECT_NEAR(modified_renyi_entropy(p, lp, 1, 1.0 - 1e-7), at_one, 1e-6);
}

TEST(AvgTrueMaxLogGapTest, Cases) {
  const auto argmax = context_from_probs({{0.7, 0.2, 0.1}, {0.1, 0.8, 0.1}}, {0, 1});
  EXPECT_DOUBLE_EQ(avg_true_max_log_gap(argmax).value, 0.0);
  const auto off = context_from_probs({{0.7, 0.2, 0.1}}, {1});
  EXPECT_NEAR(avg_true_max_log_gap(off).value, std::log(3.5), 1e-12);
}

TEST(BaselineRegistryTest, GridIsComplete) {
  const auto specs = list_baselines();
  EXPECT_EQ(specs.size(), 20u);
  std::set<std::string> names;
  for (const auto& s : specs) {
    names.insert(s.name);
    EXPECT_TRUE(s.native.has_value()) << s.name;
    EXPECT_FALSE(s.code.empty()) << s.name;
  }
  EXPECT_EQ(names.size(), specs.size());
}

TEST(BaselineRegistryTest, EverySpecEvaluatesOnRandomRecords) {
  std::mt19937_64 rng(5);
  const auto specs = list_baselines();
  for (int trial = 0; trial < 10; ++trial) {
    const auto ctx = make_context(testing::random_record(rng, 64, 16, trial % 2));
    for (const auto& s : specs) {
      const auto score = evaluate_native(*s.native, ctx);
      EXPECT_EQ(score.status, ScoreStatus::ok) << s.name;
    }
  }
}

// Logits on a 1/8 grid so that adding a constant is exact in float32.
LogitsRecord grid_record(std::mt19937_64& rng, std::size_t vocab, std::size_t n) {
  LogitsRecord r = testing::random_record(rng, vocab, n, 0);
  for (float& x : r.logits) x = static_cast<float>(static_cast<int>(rng() % 65) - 32) / 8.0f;
  return r;
}

TEST(BaselineInvariantsTest, LogitShiftChangesNoMetric) {
  std::mt19937_64 rng(9);
  const auto specs = list_baselines();
  for (int trial = 0; trial < 10; ++trial) {
    auto rec = grid_record(rng, 40, 10);
    auto shifted = rec;
    for (float& x : shifted.logits) x += 16.0f;
    const auto a = make_context(rec);
    const auto b = make_context(shifted);
    for (const auto& s : specs) {
      EXPECT_NEAR(evaluate_native(*s.native, a).value, evaluate_native(*s.native, b).value, 1e-9)
          << s.name;
    }
  }
}

TEST(BaselineInvariantsTest, RaisingTrueLogitLowersPerplexityAndRaisesMinK) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    auto rec = grid_record(rng, 20, 6);
    auto boosted = rec;
    const std::size_t pos = rng() % rec.seq_len();
    boosted.logits[pos * rec.vocab_size + rec.targets[pos]] += 1.0f;
    const auto a = make_context(rec);
    const auto b = make_context(boosted);
    EXPECT_LT(perplexity(b).value, perplexity(a).value);
    EXPECT_LT(-min_k_prob(b, 100).value, -min_k_prob(a, 100).value);
  }
}

struct Counter {
  std::size_t comparisons = 0;
};

TEST(OperationCountTest, TopTwoIsSinglePass) {
  std::mt19937_64 rng(17);
  std::vector<double> row(4096);
  for (auto& x : row) x = std::uniform_real_distribution<double>(-5, 5)(rng);
  Counter c;
  const auto [hi, next] = top_two<double>(row, [&](double a, double b) {
    ++c.comparisons;
    return a < b;
  });
  EXPECT_LE(c.comparisons, 2 * row.size());
  EXPECT_EQ(hi, *std::max_element(row.begin(), row.end()));
  EXPECT_LT(next, hi);
}

TEST(OperationCountTest, PoolingUsesPartialSelection) {
  std::mt19937_64 rng(19);
  const std::size_t n = 4096;
  std::vector<double> values(n);
  for (auto& x : values) x = std::uniform_real_distribution<double>(-5, 5)(rng);
  Counter c;
  const double got = select_mean(values, selection_count(10, n), [&](double a, double b) {
    ++c.comparisons;
    return a < b;
  });
  // A comparison sort needs on the order of n log2 n = 12n comparisons.
  EXPECT_LT(c.comparisons, 6 * n);
  auto sorted = values;
  std::sort(sorted.begin(), sorted.end());
  double expect = 0.0;
  for (std::size_t i = 0; i < selection_count(10, n); ++i) expect += sorted[i];
  expect /= static_cast<double>(selection_count(10, n));
  EXPECT_NEAR(got, expect, 1e-12);
}

}  // namespace
}  // namespace logitmia
