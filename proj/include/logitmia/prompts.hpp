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

// Prompt rendering for the generator and reviewer roles. Output is a pure
// function of the inputs.

#include <cstddef>
#include <string>
#include <vector>

#include "logitmia/baseline_metrics.hpp"
#include "logitmia/dsl.hpp"
#include "logitmia/guidance.hpp"
#include "logitmia/library.hpp"

namespace logitmia {

/// Character budget for each free-text field carried between rounds.
inline constexpr std::size_t kGuidanceFieldBudget = 600;
inline constexpr std::size_t kAnalysisBudget = 400;

inline std::string truncate_text(const std::string& s, std::size_t budget) {
  if (s.size() <= budget) return s;
  std::size_t cut = budget;
  // Do not split a UTF-8 sequence.
  while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
  return s.substr(0, cut) + " [...]";
}

inline const char* kGeneratorSystemPrompt =
    "You design membership inference scores for language models. Each score is a small "
    "program over per-token output distributions. Reply with JSON only.";

inline const char* kGuidanceSystemPrompt =
    "You review membership inference scores after each search round and return structured "
    "feedback as JSON only.";

struct GenerationPromptInput {
  ContextWindow context;
  const GuidanceReport* guidance = nullptr;  // null when guidance is disabled or absent
  std::size_t k = 5;
};

inline std::string render_generation_prompt(const GenerationPromptInput& in) {
  std::string p;
  p += "Propose " + std::to_string(in.k) +
       " new scores that separate training members from non-members. A member's sample "
       "was seen in training.\n\n";
  p += "## Program language\n\n";
  p += dsl::builtin_reference();
  p += "\nExample: mean(relu(max_v(LP) - TLP))\n\n";

  p += "## Existing scores (do not recreate)\n\n";
  for (const auto& b : list_baselines()) p += "- " + b.name + ": " + b.code + "\n";
  p += "\n";

  if (!in.context.empty()) {
    p += "## Library context\n\n";
    auto block = [&](const LibraryEntry& e) {
      p += "### " + e.spec.name + " (" + std::string(to_string(e.category)) + ", round " +
           std::to_string(e.round) + ")\n";
      p += "score " + detail::fixed(e.q, 6) + "; AUC " + detail::fixed(e.r.auc, 4) + ", accuracy " +
           detail::fixed(e.r.acc, 4) + ", TPR@5%FPR " + detail::fixed(e.r.tpr_at_5fpr, 4) + "\n";
      p += "code: " + e.spec.code + "\n";
      p += "expected_behavior: " + std::string(to_string(e.spec.direction)) + "\n";
      if (!e.analysis.empty()) p += "analysis: " + truncate_text(e.analysis, kAnalysisBudget) + "\n";
      p += "\n";
    };
    if (!in.context.strong.empty()) {
      p += "Strong examples to build on:\n\n";
      for (const auto& e : in.context.strong) block(e);
    }
    if (!in.context.weak.empty()) {
      p += "Weak examples to avoid:\n\n";
      for (const auto& e : in.context.weak) block(e);
    }
  }

  if (in.guidance) {
    const auto& n = in.guidance->next_round_strategy;
    p += "## Feedback from the previous round\n\n";
    p += "focus: " + truncate_text(n.focus_metrics, kGuidanceFieldBudget) + "\n";
    p += "ideas: " + truncate_text(n.new_ideas, kGuidanceFieldBudget) + "\n";
    p += "experiments: " + truncate_text(n.experiment_suggestions, kGuidanceFieldBudget) + "\n\n";
  }

  p += "## Reply format\n\n";
  p += "{\"metrics\": [{\"name\": \"snake_case_name\", \"formula\": \"math\", "
       "\"description\": \"rationale\", \"code\": \"program in the language above\", "
       "\"expected_behavior\": \"higher for members\" or \"lower for members\"}]}\n";
  return p;
}

/// One line per strategy: name, AUC, accuracy and TPR@5%FPR.
inline std::string render_metric_table(const std::vector<RoundCandidate>& round) {
  std::string t;
  for (const auto& c : round) {
    t += c.spec.name + "   AUC " + detail::fixed(c.r.auc, 4) + ", Accuracy " + detail::fixed(c.r.acc, 4) +
         ", TPR@5%FPR " + detail::fixed(c.r.tpr_at_5fpr, 4) + (c.failed ? " (failed)" : "") + "\n";
  }
  return t;
}

inline std::string render_guidance_prompt(const std::vector<RoundCandidate>& round) {
  std::string p;
  p += "Results of this round (AUC and accuracy: higher is better; TPR@5%FPR: recall at a 5% "
       "false-positive budget):\n\n";
  p += render_metric_table(round);
  p += "\nRank every score, label each strong, mid or weak, judge whether the round beats "
       "random guessing, name families worth pursuing or dropping, and suggest the next round.\n\n";
  p += "Reply with exactly these fields:\n";
  p += "{\"summary\": {\"overall_quality\": \"...\", \"should_save_best_strategy\": true, "
       "\"best_metrics_to_save\": [\"...\"]}, "
       "\"ranking\": [{\"name\": \"...\", \"auc\": 0.0, \"accuracy\": 0.0, \"tpr_at_5_fpr\": 0.0, "
       "\"category\": \"strong|mid|weak\", \"comment\": \"...\"}], "
       "\"useful_insights\": {\"strong_metric_families\": [\"...\"], \"weak_metric_families\": [\"...\"], "
       "\"notes\": \"...\"}, "
       "\"next_round_strategy\": {\"focus_metrics\": \"...\", \"new_ideas\": \"...\", "
       "\"experiment_suggestions\": \"...\"}}\n";
  return p;
}

}  // namespace logitmia
