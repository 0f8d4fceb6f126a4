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

#include <fstream>
#include <set>
#include <sstream>

#include "gtest/gtest.h"
#include "logitmia/generation.hpp"
#include "logitmia/guidance.hpp"
#include "logitmia/prompts.hpp"

namespace logitmia {
namespace {

std::string fixture(const std::string& name) {
  std::ifstream in(std::string(LOGITMIA_FIXTURE_DIR) + "/" + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

LibraryEntry entry(const std::string& name, double q, Category c, const std::string& code = "mean(TLP)") {
  LibraryEntry e;
  e.spec.name = name;
  e.spec.code = code;
  e.q = q;
  e.category = c;
  e.round = 1;
  return e;
}

RoundCandidate candidate(const std::string& name, double q, EvalTuple r = {}, const std::string& code = "mean(TLP)") {
  RoundCandidate c;
  c.spec.name = name;
  c.spec.code = code;
  c.r = r;
  c.q = q;
  return c;
}

// --- parse_generation -------------------------------------------------------

TEST(ParseGenerationTest, WellFormedReplyWithProseAndFences) {
  const auto g = parse_generation(fixture("generation_three.txt"));
  ASSERT_EQ(g.specs.size(), 3u);
  EXPECT_TRUE(g.rejections.empty());
  EXPECT_EQ(g.specs[0].name, "true_gap_mean");
  EXPECT_EQ(g.specs[0].direction, Direction::lower_for_members);
  EXPECT_EQ(g.specs[1].direction, Direction::higher_for_members);
  EXPECT_EQ(g.specs[2].code, "min_k_mean(TLP, 20)");
  EXPECT_FALSE(g.barren());
}

TEST(ParseGenerationTest, UnparsableProgramIsRejectedWithReason) {
  const auto g = parse_generation(fixture("generation_one_bad.txt"));
  ASSERT_EQ(g.specs.size(), 2u);
  ASSERT_EQ(g.rejections.size(), 1u);
  EXPECT_EQ(g.rejections[0].name, "sorted_tlp");
  EXPECT_NE(g.rejections[0].reason.find("unknown function `sort`"), std::string::npos);
}

TEST(ParseGenerationTest, NonJsonReplyIsBarren) {
  const auto g = parse_generation("I could not come up with anything.");
  EXPECT_TRUE(g.barren());
  EXPECT_FALSE(g.error.empty());
  EXPECT_TRUE(parse_generation("").barren());
  EXPECT_TRUE(parse_generation("{\"metrics\": [").barren());
}

TEST(ParseGenerationTest, FieldValidation) {
  const auto g = parse_generation(R"js({"metrics": [
    {"name": "a", "code": "mean(TLP)", "expected_behavior": "sideways"},
    {"name": "", "code": "mean(TLP)", "expected_behavior": "higher for members"},
    {"name": "c", "expected_behavior": "higher for members"},
    {"name": "d", "code": "mean(P)", "expected_behavior": "higher for members"},
    {"name": "e", "code": "mean(sum_v(P) + max_v(P) + min_v(P) + entropy_v(P) + max2_v(P))", "expected_behavior": "lower"},
    {"name": "f", "code": "mean(TLP)", "expected_behavior": "Higher for members"},
    {"name": "f", "code": "std(TLP)", "expected_behavior": "lower for members"},
    7
  ]})js");
  ASSERT_EQ(g.specs.size(), 1u);
  EXPECT_EQ(g.specs[0].name, "f");
  EXPECT_EQ(g.rejections.size(), 7u);
}

TEST(ParseGenerationTest, BareArrayIsAccepted) {
  const auto g = parse_generation(R"js(Result: [{"name": "x", "code": "mean(TP)", "expected_behavior": "higher for members"}])js");
  ASSERT_EQ(g.specs.size(), 1u);
}

// --- offline mutation -------------------------------------------------------

TEST(OfflineMutationTest, UniqueTypecheckedAndDeterministic) {
  const auto a = offline_mutation_generate({}, 42, 5);
  const auto b = offline_mutation_generate({}, 42, 5);
  ASSERT_EQ(a.size(), 5u);
  std::set<std::string> codes, names;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].code, b[i].code);
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_NO_THROW(dsl::compile(a[i].code)) << a[i].code;
    codes.insert(a[i].code);
    names.insert(a[i].name);
  }
  EXPECT_EQ(codes.size(), 5u);
  EXPECT_EQ(names.size(), 5u);
  EXPECT_NE(offline_mutation_generate({}, 43, 5)[0].code + offline_mutation_generate({}, 43, 5)[1].code,
            a[0].code + a[1].code);
}

TEST(OfflineMutationTest, ZeroCandidates) { EXPECT_TRUE(offline_mutation_generate({}, 1, 0).empty()); }

TEST(OfflineMutationTest, EmptyContextMutatesBaselinesOnly) {
  std::set<std::string> baseline_names;
  for (const auto& b : list_baselines()) baseline_names.insert(b.name);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (const auto& s : offline_mutation_generate({}, seed, 5)) {
      const auto parent = s.description.substr(std::string("mutation of ").size());
      EXPECT_TRUE(baseline_names.count(parent.substr(0, parent.find(':')))) << s.description;
    }
  }
}

TEST(OfflineMutationTest, AvoidsBaselineAndLibraryPrograms) {
  std::set<std::string> baseline_codes;
  for (const auto& b : list_baselines()) baseline_codes.insert(detail::canonical(b.code));
  StrategyLibrary lib;
  const auto first = offline_mutation_generate({}, 9, 5);
  std::vector<LibraryEntry> batch;
  for (const auto& s : first) {
    LibraryEntry e;
    e.spec = s;
    e.round = 1;
    batch.push_back(e);
  }
  lib.insert(batch);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    for (const auto& s : offline_mutation_generate(select_context(lib), seed, 5, &lib)) {
      EXPECT_FALSE(baseline_codes.count(detail::canonical(s.code))) << s.code;
      EXPECT_FALSE(lib.contains_code(s.code)) << s.code;
    }
  }
}

TEST(OfflineMutationTest, UsesStrongContextEntries) {
  ContextWindow ctx;
  ctx.strong.push_back(entry("seed_strategy", 0.9, Category::strong, "mean(relu(max_v(LP) - TLP))"));
  bool used = false;
  for (const auto& s : offline_mutation_generate(ctx, 3, 10)) {
    used = used || s.name.rfind("seed_strategy", 0) == 0;
  }
  EXPECT_TRUE(used);
}

// --- guidance ----------------------------------------------------------------

TEST(RuleGuidanceTest, TwoStrategyRound) {
  const auto g = rule_based_guidance({candidate("strategy2", 0.4165, {0.4375, 0.5, 0.04}),
                                      candidate("strategy1", 0.69682, {0.7719, 0.7267, 0.1567})});
  ASSERT_EQ(g.ranking.size(), 2u);
  EXPECT_EQ(g.ranking[0].name, "strategy1");
  EXPECT_EQ(g.ranking[1].name, "strategy2");
  EXPECT_EQ(g.ranking[0].category, Category::strong);
  EXPECT_EQ(g.ranking[1].category, Category::weak);
  EXPECT_DOUBLE_EQ(g.ranking[0].auc, 0.7719);
  EXPECT_TRUE(g.summary.should_save_best_strategy);
  EXPECT_EQ(g.summary.best_metrics_to_save, std::vector<std::string>{"strategy1"});
}

TEST(RuleGuidanceTest, SingleStrategyIsStrong) {
  const auto g = rule_based_guidance({candidate("only", 0.3)});
  ASSERT_EQ(g.ranking.size(), 1u);
  EXPECT_EQ(g.ranking[0].category, Category::strong);
}

TEST(RuleGuidanceTest, DeterministicAndSerializable) {
  std::vector<RoundCandidate> round = {
      candidate("a", 0.8, {0.85, 0.8, 0.4}, "mean(relu(max_v(LP) - TLP))"),
      candidate("b", 0.5, {0.5, 0.5, 0.05}, "max_k_mean(renyi_v(P, 2), 10)"),
      candidate("c", 0.6, {0.62, 0.6, 0.1}, "min_k_mean(TLP, 20)")};
  const auto g1 = rule_based_guidance(round);
  const auto g2 = rule_based_guidance(round);
  EXPECT_EQ(g1, g2);
  const nlohmann::json j = g1;
  EXPECT_EQ(parse_guidance(j, {"a", "b", "c"}), g1);
  EXPECT_EQ(g1.useful_insights.strong_metric_families, std::vector<std::string>{"mean/relu"});
  EXPECT_EQ(g1.useful_insights.weak_metric_families, std::vector<std::string>{"max_k_mean/renyi_v"});
}

TEST(ParseGuidanceTest, RejectsIncompleteRanking) {
  const nlohmann::json j = rule_based_guidance({candidate("a", 0.8), candidate("b", 0.4)});
  EXPECT_THROW(parse_guidance(j, {"a", "b", "c"}), GuidanceError);
  auto bad = j;
  bad["ranking"][0]["category"] = "excellent";
  EXPECT_THROW(parse_guidance(bad, {"a", "b"}), GuidanceError);
  auto missing = j;
  missing.erase("summary");
  EXPECT_THROW(parse_guidance(missing, {"a", "b"}), GuidanceError);
  auto medium = j;
  medium["ranking"][1]["category"] = "medium";
  EXPECT_EQ(parse_guidance(medium, {"a", "b"}).ranking[1].category, Category::mid);
}

// --- prompts -----------------------------------------------------------------

TEST(PromptTest, EmptyContextOmitsContextSection) {
  GenerationPromptInput in;
  const auto p = render_generation_prompt(in);
  EXPECT_EQ(p.find("## Library context"), std::string::npos);
  EXPECT_EQ(p.find("## Feedback"), std::string::npos);
  EXPECT_NE(p.find(dsl::builtin_reference()), std::string::npos);
  for (const auto& b : list_baselines()) EXPECT_NE(p.find(b.name + ": " + b.code), std::string::npos);
  EXPECT_NE(p.find("expected_behavior"), std::string::npos);
}

TEST(PromptTest, ContainsWindowEntriesAndGuidance) {
  StrategyLibrary lib;
  for (int i = 0; i < 8; ++i) {
    LibraryEntry e = entry("entry_" + std::to_string(i), i / 10.0, Category::mid);
    e.round = 1 + i / 4;
    lib.insert({e});
  }
  const auto win = select_context(lib);
  const auto g = rule_based_guidance({candidate("a", 0.8, {0.85, 0.8, 0.4})});
  GenerationPromptInput in{win, &g, 5};
  const auto p = render_generation_prompt(in);
  for (const auto& e : win.entries()) EXPECT_NE(p.find(e.spec.name), std::string::npos) << e.spec.name;
  EXPECT_NE(p.find("## Feedback from the previous round"), std::string::npos);
  EXPECT_NE(p.find(g.next_round_strategy.focus_metrics), std::string::npos);
  EXPECT_EQ(render_generation_prompt(in), p);  // byte-deterministic
  in.guidance = nullptr;
  EXPECT_EQ(render_generation_prompt(in).find("## Feedback"), std::string::npos);
}

TEST(PromptTest, GuidanceTextIsTruncatedToBudget) {
  GuidanceReport g;
  g.next_round_strategy.new_ideas = std::string(5000, 'x');
  const auto p = render_generation_prompt({{}, &g, 5});
  EXPECT_EQ(p.find(std::string(kGuidanceFieldBudget + 1, 'x')), std::string::npos);
  EXPECT_NE(p.find(std::string(kGuidanceFieldBudget, 'x') + " [...]"), std::string::npos);
  EXPECT_EQ(truncate_text("\xc3\xa9\xc3\xa9", 3), "\xc3\xa9 [...]");
}

TEST(PromptTest, GuidancePromptHasMetricTable) {
  const auto p = render_guidance_prompt({candidate("strategy1", 0.69682, {0.7719, 0.7267, 0.1567})});
  EXPECT_NE(p.find("strategy1   AUC 0.7719, Accuracy 0.7267, TPR@5%FPR 0.1567"), std::string::npos);
  EXPECT_NE(p.find("should_save_best_strategy"), std::string::npos);
}

}  // namespace
}  // namespace logitmia
