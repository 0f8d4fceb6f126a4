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

// Candidate generation: parsing model replies into strategy specs and a
// deterministic offline mutation generator.

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "logitmia/baseline_metrics.hpp"
#include "logitmia/dsl.hpp"
#include "logitmia/library.hpp"

namespace logitmia {

struct Rejection {
  std::string name;
  std::string reason;
};

inline void to_json(nlohmann::json& j, const Rejection& r) {
  j = nlohmann::json{{"name", r.name}, {"reason", r.reason}};
}

struct GenerationResult {
  std::vector<StrategySpec> specs;
  std::vector<Rejection> rejections;
  std::string error;  // set when no JSON payload was found

  bool barren() const { return specs.empty(); }
};

namespace detail {

// End of the balanced JSON value starting at `begin`, or npos.
inline std::size_t balanced_end(std::string_view s, std::size_t begin) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = begin; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{' || c == '[') {
      ++depth;
    } else if (c == '}' || c == ']') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

}  // namespace detail

/// Finds the first JSON object carrying a "metrics" list in free text, which
/// may include prose or code fences. Falls back to the first bare array.
inline std::optional<nlohmann::json> extract_metrics_json(std::string_view text) {
  std::optional<nlohmann::json> first_array;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{' && text[i] != '[') continue;
    const std::size_t end = detail::balanced_end(text, i);
    if (end == std::string_view::npos) continue;
    auto j = nlohmann::json::parse(text.substr(i, end - i), nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) continue;
    if (j.is_object() && j.contains("metrics") && j["metrics"].is_array()) return j;
    if (j.is_array() && !first_array) first_array = nlohmann::json{{"metrics", j}};
  }
  return first_array;
}

/// Same search for any JSON object holding `key`.
inline std::optional<nlohmann::json> extract_json_with_key(std::string_view text, const char* key) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{') continue;
    const std::size_t end = detail::balanced_end(text, i);
    if (end == std::string_view::npos) continue;
    auto j = nlohmann::json::parse(text.substr(i, end - i), nullptr, false);
    if (!j.is_discarded() && j.is_object() && j.contains(key)) return j;
  }
  return std::nullopt;
}

/// Validates one candidate object; returns the spec or the reason it failed.
inline std::variant<StrategySpec, std::string> validate_candidate(const nlohmann::json& m) {
  if (!m.is_object()) return std::string("candidate is not an object");
  auto str = [&](const char* key) -> std::optional<std::string> {
    if (!m.contains(key) || !m[key].is_string()) return std::nullopt;
    return m[key].get<std::string>();
  };
  StrategySpec s;
  const auto name = str("name");
  if (!name || name->find_first_not_of(" \t\n") == std::string::npos) return std::string("missing name");
  s.name = *name;
  const auto code = str("code");
  if (!code) return std::string("missing code");
  s.code = *code;
  const auto behavior = str("expected_behavior");
  if (!behavior) return std::string("missing expected_behavior");
  const auto dir = parse_direction(*behavior);
  if (!dir) return "expected_behavior must say higher or lower for members, got '" + *behavior + "'";
  s.direction = *dir;
  s.formula = str("formula").value_or("");
  s.description = str("description").value_or("");
  try {
    dsl::compile(s.code);
  } catch (const std::exception& e) {
    return std::string(e.what());
  }
  return s;
}

/// Parses a generator reply. Invalid candidates are dropped with a reason;
/// the call never throws.
inline GenerationResult parse_generation(std::string_view response) {
  GenerationResult out;
  const auto j = extract_metrics_json(response);
  if (!j) {
    out.error = "no JSON metrics payload in response";
    return out;
  }
  std::set<std::string> seen;
  for (const auto& m : (*j)["metrics"]) {
    auto v = validate_candidate(m);
    const std::string name =
        m.is_object() && m.contains("name") && m["name"].is_string() ? m["name"].get<std::string>() : "";
    if (auto* err = std::get_if<std::string>(&v)) {
      out.rejections.push_back({name, *err});
      continue;
    }
    auto spec = std::get<StrategySpec>(std::move(v));
    if (!seen.insert(spec.name).second) {
      out.rejections.push_back({spec.name, "duplicate name in response"});
      continue;
    }
    out.specs.push_back(std::move(spec));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Offline mutation generator

namespace detail {

inline void collect(dsl::Node& n, const std::function<bool(const dsl::Node&)>& pred,
                    std::vector<dsl::Node*>& out) {
  if (pred(n)) out.push_back(&n);
  for (auto& a : n.args) collect(a, pred, out);
}

inline std::vector<dsl::Node*> find_nodes(dsl::Node& root, const std::function<bool(const dsl::Node&)>& pred) {
  std::vector<dsl::Node*> out;
  collect(root, pred, out);
  return out;
}

inline bool is_call(const dsl::Node& n, std::string_view name) {
  return n.kind == dsl::Node::Kind::call && n.name == name;
}

inline std::string canonical(std::string_view code) { return dsl::pretty_print(dsl::parse_expression(code)); }

inline std::string tag_number(double v) {
  std::string s = dsl::format_number(v);
  for (char& c : s) {
    if (c == '.') c = 'p';
  }
  return s;
}

}  // namespace detail

inline constexpr double kMutationAlphas[] = {0.5, 1.0, 2.0, std::numeric_limits<double>::infinity()};
inline constexpr double kMutationKs[] = {0, 10, 20, 50, 100};
/// Mutated programs above this many AST nodes are discarded.
inline constexpr std::size_t kMaxMutationNodes = 64;

/// Produces up to `k` unique, compilable programs by mutating baselines and
/// the window's strong entries. Programs already in the baseline set, in
/// `library`, or produced earlier in the call are skipped. Deterministic
/// under `seed`.
inline std::vector<StrategySpec> offline_mutation_generate(const ContextWindow& context, std::uint64_t seed,
                                                           std::size_t k,
                                                           const StrategyLibrary* library = nullptr) {
  std::vector<StrategySpec> out;
  if (k == 0) return out;
  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };

  std::vector<StrategySpec> baselines = list_baselines();
  for (auto& b : baselines) b.native.reset();
  std::vector<StrategySpec> strong;
  for (const auto& e : context.strong) {
    if (!e.failed) strong.push_back(e.spec);
  }

  std::set<std::string> taken_codes, taken_names;
  for (const auto& b : baselines) taken_codes.insert(detail::canonical(b.code));
  if (library) {
    for (const auto& e : library->entries()) {
      try {
        taken_codes.insert(detail::canonical(e.spec.code));
      } catch (const std::exception&) {
      }
      taken_names.insert(e.spec.name);
    }
  }

  auto parent = [&]() -> const StrategySpec& {
    if (!strong.empty() && rng() % 5 < 3) return strong[pick(strong.size())];
    return baselines[pick(baselines.size())];
  };

  static const char* kPlainReductions[] = {"mean", "var", "std", "min", "max", "skew", "kurt"};
  const std::size_t max_attempts = 200 * k;
  for (std::size_t attempt = 0; attempt < max_attempts && out.size() < k; ++attempt) {
    const StrategySpec& p = parent();
    dsl::Node ast;
    try {
      ast = dsl::parse_expression(p.code);
    } catch (const std::exception&) {
      continue;
    }
    StrategySpec child;
    child.direction = p.direction;
    std::string tag, what;
    switch (pick(5)) {
      case 0: {  // swap a reduction
        auto nodes = detail::find_nodes(ast, [](const dsl::Node& n) {
          if (n.kind != dsl::Node::Kind::call) return false;
          const auto* b = dsl::find_builtin(n.name);
          return b && b->category == dsl::BuiltinCategory::reduction;
        });
        if (nodes.empty()) continue;
        dsl::Node* n = nodes[pick(nodes.size())];
        if (n->args.size() == 2) {
          n->name = n->name == "min_k_mean" ? "max_k_mean" : "min_k_mean";
        } else {
          const char* to = kPlainReductions[pick(std::size(kPlainReductions))];
          if (n->name == to) continue;
          n->name = to;
        }
        tag = n->name;
        what = "reduction swapped to " + n->name;
        break;
      }
      case 1: {  // perturb a Renyi order
        auto nodes = detail::find_nodes(ast, [](const dsl::Node& n) { return detail::is_call(n, "renyi_v"); });
        if (nodes.empty()) continue;
        dsl::Node* n = nodes[pick(nodes.size())];
        const double a = kMutationAlphas[pick(std::size(kMutationAlphas))];
        if (n->args[1].kind == dsl::Node::Kind::number && n->args[1].number == a) continue;
        n->args[1] = dsl::Node::make_number(a);
        tag = "a" + detail::tag_number(a);
        what = "order set to " + dsl::format_number(a);
        break;
      }
      case 2: {  // perturb a pooling fraction
        auto nodes = detail::find_nodes(ast, [](const dsl::Node& n) {
          return detail::is_call(n, "min_k_mean") || detail::is_call(n, "max_k_mean");
        });
        if (nodes.empty()) continue;
        dsl::Node* n = nodes[pick(nodes.size())];
        const double kk = kMutationKs[pick(std::size(kMutationKs))];
        if (n->args[1].kind == dsl::Node::Kind::number && n->args[1].number == kk) continue;
        n->args[1] = dsl::Node::make_number(kk);
        tag = "k" + detail::tag_number(kk);
        what = "pooling fraction set to " + dsl::format_number(kk) + "%";
        break;
      }
      case 3: {  // compose with a second program
        const StrategySpec& q = parent();
        if (q.code == p.code) continue;
        dsl::Node other;
        try {
          other = dsl::parse_expression(q.code);
        } catch (const std::exception&) {
          continue;
        }
        const char op = q.direction == p.direction ? '+' : '-';
        ast = dsl::Node::make_binary(op, std::move(ast), std::move(other));
        tag = std::string(op == '+' ? "plus_" : "minus_") + q.name;
        what = std::string(op == '+' ? "sum with " : "difference with ") + q.name;
        break;
      }
      default: {  // wrap the argument of the outer reduction
        const char* fn = rng() % 2 ? "abs" : "relu";
        dsl::Node* target = &ast;
        if (ast.kind == dsl::Node::Kind::call && !ast.args.empty()) {
          const auto* b = dsl::find_builtin(ast.name);
          if (b && b->category == dsl::BuiltinCategory::reduction) target = &ast.args[0];
        }
        if (detail::is_call(*target, fn)) continue;
        *target = dsl::Node::make_call(fn, {std::move(*target)});
        tag = fn;
        what = std::string("wrapped in ") + fn;
        break;
      }
    }
    child.code = dsl::pretty_print(ast);
    try {
      if (dsl::compile(child.code).node_count > kMaxMutationNodes) continue;
    } catch (const std::exception&) {
      continue;
    }
    const std::string key = detail::canonical(child.code);
    if (!taken_codes.insert(key).second) continue;

    std::string base = p.name + "_" + tag;
    if (base.size() > 56) base.resize(56);
    std::string name = base;
    for (int suffix = 2; taken_names.count(name); ++suffix) name = base + "_v" + std::to_string(suffix);
    taken_names.insert(name);
    child.name = name;
    child.formula = child.code;
    child.description = "mutation of " + p.name + ": " + what;
    out.push_back(std::move(child));
  }
  return out;
}

}  // namespace logitmia
