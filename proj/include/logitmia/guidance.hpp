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

// Per-round feedback reports: the structured schema, a deterministic
// rule-based producer and strict parsing of model-written reports.

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "logitmia/dsl.hpp"
#include "logitmia/evaluation.hpp"
#include "logitmia/library.hpp"

namespace logitmia {

struct GuidanceSummary {
  std::string overall_quality;
  bool should_save_best_strategy = false;
  std::vector<std::string> best_metrics_to_save;

  friend bool operator==(const GuidanceSummary&, const GuidanceSummary&) = default;
};

struct RankingEntry {
  std::string name;
  double auc = 0.0;
  double accuracy = 0.0;
  double tpr_at_5_fpr = 0.0;
  Category category = Category::mid;
  std::string comment;

  friend bool operator==(const RankingEntry&, const RankingEntry&) = default;
};

struct UsefulInsights {
  std::vector<std::string> strong_metric_families;
  std::vector<std::string> weak_metric_families;
  std::string notes;

  friend bool operator==(const UsefulInsights&, const UsefulInsights&) = default;
};

struct NextRoundStrategy {
  std::string focus_metrics;
  std::string new_ideas;
  std::string experiment_suggestions;

  friend bool operator==(const NextRoundStrategy&, const NextRoundStrategy&) = default;
};

struct GuidanceReport {
  GuidanceSummary summary;
  std::vector<RankingEntry> ranking;
  UsefulInsights useful_insights;
  NextRoundStrategy next_round_strategy;

  friend bool operator==(const GuidanceReport&, const GuidanceReport&) = default;
};

class GuidanceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void to_json(nlohmann::json& j, const GuidanceReport& g) {
  nlohmann::json ranking = nlohmann::json::array();
  for (const auto& r : g.ranking) {
    ranking.push_back({{"name", r.name},
                       {"auc", r.auc},
                       {"accuracy", r.accuracy},
                       {"tpr_at_5_fpr", r.tpr_at_5_fpr},
                       {"category", std::string(to_string(r.category))},
                       {"comment", r.comment}});
  }
  j = {{"summary",
        {{"overall_quality", g.summary.overall_quality},
         {"should_save_best_strategy", g.summary.should_save_best_strategy},
         {"best_metrics_to_save", g.summary.best_metrics_to_save}}},
       {"ranking", ranking},
       {"useful_insights",
        {{"strong_metric_families", g.useful_insights.strong_metric_families},
         {"weak_metric_families", g.useful_insights.weak_metric_families},
         {"notes", g.useful_insights.notes}}},
       {"next_round_strategy",
        {{"focus_metrics", g.next_round_strategy.focus_metrics},
         {"new_ideas", g.next_round_strategy.new_ideas},
         {"experiment_suggestions", g.next_round_strategy.experiment_suggestions}}}};
}

namespace detail {

// Text fields are sometimes returned as lists of sentences.
inline std::string text_field(const nlohmann::json& obj, const char* key) {
  const auto& v = obj.at(key);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string out;
    for (const auto& x : v) {
      if (!x.is_string()) throw GuidanceError(std::string("field '") + key + "' must hold text");
      if (!out.empty()) out += "; ";
      out += x.get<std::string>();
    }
    return out;
  }
  throw GuidanceError(std::string("field '") + key + "' must hold text");
}

inline std::vector<std::string> list_field(const nlohmann::json& obj, const char* key) {
  const auto& v = obj.at(key);
  if (v.is_string()) return {v.get<std::string>()};
  std::vector<std::string> out;
  for (const auto& x : v) out.push_back(x.get<std::string>());
  return out;
}

}  // namespace detail

/// Parses a report and checks that its ranking names exactly `expected_names`.
inline GuidanceReport parse_guidance(const nlohmann::json& j,
                                     const std::vector<std::string>& expected_names) {
  GuidanceReport g;
  try {
    const auto& s = j.at("summary");
    g.summary.overall_quality = detail::text_field(s, "overall_quality");
    g.summary.should_save_best_strategy = s.at("should_save_best_strategy").get<bool>();
    g.summary.best_metrics_to_save = detail::list_field(s, "best_metrics_to_save");
    for (const auto& r : j.at("ranking")) {
      RankingEntry e;
      e.name = r.at("name").get<std::string>();
      e.auc = r.at("auc").get<double>();
      e.accuracy = r.at("accuracy").get<double>();
      e.tpr_at_5_fpr = r.at("tpr_at_5_fpr").get<double>();
      e.category = category_from_string(r.at("category").get<std::string>());
      e.comment = r.contains("comment") ? detail::text_field(r, "comment") : "";
      g.ranking.push_back(std::move(e));
    }
    const auto& u = j.at("useful_insights");
    g.useful_insights.strong_metric_families = detail::list_field(u, "strong_metric_families");
    g.useful_insights.weak_metric_families = detail::list_field(u, "weak_metric_families");
    g.useful_insights.notes = detail::text_field(u, "notes");
    const auto& n = j.at("next_round_strategy");
    g.next_round_strategy.focus_metrics = detail::text_field(n, "focus_metrics");
    g.next_round_strategy.new_ideas = detail::text_field(n, "new_ideas");
    g.next_round_strategy.experiment_suggestions = detail::text_field(n, "experiment_suggestions");
  } catch (const nlohmann::json::exception& e) {
    throw GuidanceError(std::string("malformed guidance report: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw GuidanceError(std::string("malformed guidance report: ") + e.what());
  }
  std::multiset<std::string> got, want(expected_names.begin(), expected_names.end());
  for (const auto& r : g.ranking) got.insert(r.name);
  if (got != want) throw GuidanceError("guidance ranking does not cover exactly the round's strategies");
  return g;
}

/// Family label of a strategy: the native metric kind, or the head call of
/// its program followed by the head of that call's first argument.
inline std::string strategy_family(const StrategySpec& spec) {
  if (spec.native) return std::string(to_string(spec.native->kind));
  try {
    const auto ast = dsl::parse_expression(spec.code);
    auto head = [](const dsl::Node& n) -> std::string {
      switch (n.kind) {
        case dsl::Node::Kind::call: return n.name;
        case dsl::Node::Kind::identifier: return n.name;
        case dsl::Node::Kind::number: return "const";
        case dsl::Node::Kind::negate: return "neg";
        case dsl::Node::Kind::binary: return std::string(1, n.op);
      }
      return "?";
    };
    std::string f = head(ast);
    if (!ast.args.empty()) f += "/" + head(ast.args.front());
    return f;
  } catch (const std::exception&) {
    return "unparsed";
  }
}

namespace detail {

inline std::string join(const std::vector<std::string>& v, const std::string& sep = ", ") {
  std::string out;
  for (const auto& s : v) {
    if (!out.empty()) out += sep;
    out += s;
  }
  return out;
}

inline void push_unique(std::vector<std::string>& v, const std::string& s) {
  if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
}

}  // namespace detail

/// Deterministic report computed from the round's results: ranking by Q,
/// categories from per-round percentiles, families from program heads.
inline GuidanceReport rule_based_guidance(const std::vector<RoundCandidate>& round) {
  GuidanceReport g;
  if (round.empty()) {
    g.summary.overall_quality = "none";
    g.next_round_strategy.experiment_suggestions = "previous round produced no valid strategies";
    return g;
  }
  const auto categorized = categorize(round, 0);
  std::vector<std::size_t> order(round.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (round[a].q != round[b].q) return round[a].q > round[b].q;
    return round[a].spec.name < round[b].spec.name;
  });

  double best_auc = 0.0;
  for (std::size_t i : order) {
    const auto& c = round[i];
    RankingEntry e{c.spec.name, c.r.auc, c.r.acc, c.r.tpr_at_5fpr, categorized[i].category, ""};
    e.comment = c.failed ? "failed: " + (c.analysis.empty() ? std::string("no usable scores") : c.analysis)
                         : "Q " + detail::fixed(c.q, 5) + ", family " + strategy_family(c.spec);
    g.ranking.push_back(std::move(e));
    if (!c.failed) best_auc = std::max(best_auc, c.r.auc);
  }

  std::vector<std::string> strong_names, strong_fam, weak_fam;
  for (const auto& e : g.ranking) {
    const auto& c = *std::find_if(round.begin(), round.end(), [&](const auto& x) { return x.spec.name == e.name; });
    if (c.failed) {
      detail::push_unique(weak_fam, strategy_family(c.spec));
      continue;
    }
    if (e.category == Category::strong) {
      strong_names.push_back(e.name);
      detail::push_unique(strong_fam, strategy_family(c.spec));
    } else if (e.category == Category::weak) {
      detail::push_unique(weak_fam, strategy_family(c.spec));
    }
  }
  std::erase_if(weak_fam, [&](const std::string& f) {
    return std::find(strong_fam.begin(), strong_fam.end(), f) != strong_fam.end();
  });

  g.summary.overall_quality = best_auc >= 0.75 ? "high" : (best_auc >= 0.6 ? "medium" : "low");
  g.summary.should_save_best_strategy = best_auc >= 0.6;
  if (g.summary.should_save_best_strategy) g.summary.best_metrics_to_save = strong_names;
  g.useful_insights.strong_metric_families = strong_fam;
  g.useful_insights.weak_metric_families = weak_fam;
  g.useful_insights.notes = "best AUC " + detail::fixed(best_auc, 4) + " over " +
                            std::to_string(round.size()) + " strategies";
  g.next_round_strategy.focus_metrics =
      strong_names.empty() ? "no strong strategies this round" : "refine " + detail::join(strong_names);
  g.next_round_strategy.new_ideas =
      strong_fam.empty() ? "explore new families"
                         : "vary pooling and orders within " + detail::join(strong_fam) +
                               "; combine strong programs additively";
  g.next_round_strategy.experiment_suggestions =
      weak_fam.empty() ? "keep current families" : "deprioritize " + detail::join(weak_fam);
  return g;
}

}  // namespace logitmia
