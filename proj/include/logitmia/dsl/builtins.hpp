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

#include <algorithm>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace logitmia::dsl {

enum class BuiltinCategory {
  vocab_reduction,  // matrix -> seq_vector, one pass over the vocabulary
  elementwise,      // any rank -> same rank
  sequence,         // seq_vector -> seq_vector
  reduction,        // seq_vector -> scalar
};

struct Builtin {
  std::string_view name;
  BuiltinCategory category;
  std::size_t arity;
  std::string_view signature;
  std::string_view summary;
  int vocab_passes;
};

/// The complete builtin table. Order is stable; it is rendered verbatim into
/// generation prompts.
inline std::span<const Builtin> builtins() {
  static const std::vector<Builtin> table = {
      {"sum_v", BuiltinCategory::vocab_reduction, 1, "sum_v(m: matrix) -> seq", "row sum over the vocabulary", 1},
      {"max_v", BuiltinCategory::vocab_reduction, 1, "max_v(m: matrix) -> seq", "row maximum", 1},
      {"max2_v", BuiltinCategory::vocab_reduction, 1, "max2_v(m: matrix) -> seq", "row second-largest value", 1},
      {"min_v", BuiltinCategory::vocab_reduction, 1, "min_v(m: matrix) -> seq", "row minimum", 1},
      {"entropy_v", BuiltinCategory::vocab_reduction, 1, "entropy_v(m: matrix) -> seq", "Shannon entropy -sum m*log(m) of each row", 1},
      {"renyi_v", BuiltinCategory::vocab_reduction, 2, "renyi_v(m: matrix, alpha: const) -> seq", "Renyi entropy of each row; alpha > 0 or inf", 1},
      {"abs", BuiltinCategory::elementwise, 1, "abs(x) -> same", "absolute value", 0},
      {"log", BuiltinCategory::elementwise, 1, "log(x) -> same", "natural logarithm", 0},
      {"exp", BuiltinCategory::elementwise, 1, "exp(x) -> same", "exponential", 0},
      {"relu", BuiltinCategory::elementwise, 1, "relu(x) -> same", "max(0, x)", 0},
      {"clamp", BuiltinCategory::elementwise, 3, "clamp(x, lo: const, hi: const) -> same", "limit x to [lo, hi]", 0},
      {"pow", BuiltinCategory::elementwise, 2, "pow(x, c: const) -> same", "x raised to a constant power", 0},
      {"diff", BuiltinCategory::sequence, 1, "diff(s: seq) -> seq (one shorter)", "forward differences s[i+1] - s[i]", 0},
      {"gradient", BuiltinCategory::sequence, 1, "gradient(s: seq) -> seq", "central differences, one-sided at the ends; needs N >= 3", 0},
      {"trim_end", BuiltinCategory::sequence, 1, "trim_end(s: seq) -> seq (one shorter)", "drop the last position", 0},
      {"mean", BuiltinCategory::reduction, 1, "mean(s: seq) -> scalar", "arithmetic mean", 0},
      {"sum", BuiltinCategory::reduction, 1, "sum(s: seq) -> scalar", "sum", 0},
      {"var", BuiltinCategory::reduction, 1, "var(s: seq) -> scalar", "population variance", 0},
      {"std", BuiltinCategory::reduction, 1, "std(s: seq) -> scalar", "population standard deviation", 0},
      {"min", BuiltinCategory::reduction, 1, "min(s: seq) -> scalar", "minimum", 0},
      {"max", BuiltinCategory::reduction, 1, "max(s: seq) -> scalar", "maximum", 0},
      {"skew", BuiltinCategory::reduction, 1, "skew(s: seq) -> scalar", "population skewness; 0 for constant input", 0},
      {"kurt", BuiltinCategory::reduction, 1, "kurt(s: seq) -> scalar", "excess kurtosis; 0 for constant input", 0},
      {"min_k_mean", BuiltinCategory::reduction, 2, "min_k_mean(s: seq, k: const) -> scalar", "mean of the lowest k% (at least one)", 0},
      {"max_k_mean", BuiltinCategory::reduction, 2, "max_k_mean(s: seq, k: const) -> scalar", "mean of the highest k% (at least one)", 0},
  };
  return table;
}

inline const Builtin* find_builtin(std::string_view name) {
  const auto table = builtins();
  auto it = std::find_if(table.begin(), table.end(), [&](const Builtin& b) { return b.name == name; });
  return it == table.end() ? nullptr : &*it;
}

struct Identifier {
  std::string_view name;
  bool matrix;
  bool reads_targets;
  std::string_view summary;
};

inline std::span<const Identifier> identifiers() {
  static const std::vector<Identifier> table = {
      {"P", true, false, "probabilities, N x V"},
      {"LP", true, false, "log-probabilities, N x V"},
      {"Y", false, true, "ground-truth token ids, length N"},
      {"TP", false, true, "probability of the ground-truth token, length N"},
      {"TLP", false, true, "log-probability of the ground-truth token, length N"},
  };
  return table;
}

inline const Identifier* find_identifier(std::string_view name) {
  const auto table = identifiers();
  auto it =
      std::find_if(table.begin(), table.end(), [&](const Identifier& i) { return i.name == name; });
  return it == table.end() ? nullptr : &*it;
}

inline std::string_view to_string(BuiltinCategory c) {
  switch (c) {
    case BuiltinCategory::vocab_reduction: return "vocab";
    case BuiltinCategory::elementwise: return "elementwise";
    case BuiltinCategory::sequence: return "sequence";
    case BuiltinCategory::reduction: return "reduction";
  }
  return "?";
}

/// Machine-readable reference of inputs and builtins, one per line:
/// `name | category | signature | vocab passes | summary`.
inline std::string builtin_reference() {
  std::string out = "inputs:\n";
  for (const auto& id : identifiers()) {
    out += "  ";
    out += id.name;
    out += " : ";
    out += id.summary;
    out += '\n';
  }
  out += "builtins (name | category | signature | vocab passes | summary):\n";
  for (const auto& b : builtins()) {
    out += "  ";
    out += b.name;
    out += " | ";
    out += to_string(b.category);
    out += " | ";
    out += b.signature;
    out += " | ";
    out += std::to_string(b.vocab_passes);
    out += " | ";
    out += b.summary;
    out += '\n';
  }
  out +=
      "operators: + - * / and unary minus; scalars broadcast over sequences and matrices, "
      "sequences broadcast over matrix rows.\n"
      "literals: decimal numbers and inf.\n"
      "rules: the program must reduce to a scalar; at most 4 vocab passes; no sorting or "
      "ranking functions exist.\n";
  return out;
}

}  // namespace logitmia::dsl
