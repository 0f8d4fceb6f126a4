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

/// @file evaluate.hpp
/// @brief Deterministic 64-bit interpreter for typed DSL programs.
///
/// Matrix-valued subexpressions are never materialized: each vocab reduction
/// evaluates its argument one row at a time into per-node row buffers, so a
/// program touches every (position, vocab) cell once per vocab reduction.
/// Scalar and sequence subexpressions are computed once per record and
/// memoized by node id.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "logitmia/baseline_metrics.hpp"
#include "logitmia/dsl/program.hpp"
#include "logitmia/strategy.hpp"

namespace logitmia::dsl {

namespace detail {

struct InsufficientPositions {};

using Value = std::variant<double, std::vector<double>>;

inline double apply_binary(char op, double a, double b) {
  switch (op) {
    case '+': return a + b;
    case '-': return a - b;
    case '*': return a * b;
    default: return a / b;
  }
}

enum class Elementwise { abs, log, exp, relu, clamp, pow };

inline Elementwise elementwise_kind(const std::string& f) {
  if (f == "abs") return Elementwise::abs;
  if (f == "log") return Elementwise::log;
  if (f == "exp") return Elementwise::exp;
  if (f == "relu") return Elementwise::relu;
  if (f == "clamp") return Elementwise::clamp;
  if (f == "pow") return Elementwise::pow;
  throw std::logic_error("not an elementwise builtin: " + f);
}

/// Applies an elementwise builtin to every value in `xs`.
inline void apply_elementwise(const Node& call, std::span<double> xs) {
  switch (elementwise_kind(call.name)) {
    case Elementwise::abs:
      for (double& x : xs) x = std::abs(x);
      return;
    case Elementwise::log:
      for (double& x : xs) x = std::log(x);
      return;
    case Elementwise::exp:
      for (double& x : xs) x = std::exp(x);
      return;
    case Elementwise::relu:
      for (double& x : xs) x = std::max(0.0, x);
      return;
    case Elementwise::clamp: {
      const double lo = *constant_value(call.args[1]);
      const double hi = *constant_value(call.args[2]);
      for (double& x : xs) x = std::clamp(x, lo, hi);
      return;
    }
    case Elementwise::pow: {
      const double c = *constant_value(call.args[1]);
      if (c == 1.0) return;
      if (c == 2.0) {
        for (double& x : xs) x = x * x;
      } else {
        for (double& x : xs) x = std::pow(x, c);
      }
      return;
    }
  }
}

/// Runs `body` with the functor for a binary operator.
template <class Body>
inline void with_operator(char op, Body&& body) {
  switch (op) {
    case '+': body(std::plus<>{}); return;
    case '-': body(std::minus<>{}); return;
    case '*': body(std::multiplies<>{}); return;
    default: body(std::divides<>{}); return;
  }
}

class Evaluator {
 public:
  Evaluator(const Program& p, const EvalContext& ctx) : program_(p), ctx_(ctx), memo_(p.node_count), scratch_(p.node_count) {}

  Value eval(const Node& n) {
    auto& slot = memo_[n.id];
    if (!slot) slot = compute(n);
    return *slot;
  }

 private:
  std::size_t length(const Type& t) const {
    const std::size_t n = ctx_.positions();
    if (t.shrink >= n) throw InsufficientPositions{};
    return n - t.shrink;
  }

  const std::vector<double>& identifier_seq(const std::string& name) const {
    if (name == "TP") return ctx_.true_probs;
    if (name == "TLP") return ctx_.true_log_probs;
    return ctx_.targets;
  }

  Value compute(const Node& n) {
    switch (n.kind) {
      case Node::Kind::number: return n.number;
      case Node::Kind::identifier: return identifier_seq(n.name);
      case Node::Kind::negate: {
        Value v = eval(n.args[0]);
        return map(std::move(v), [](double x) { return -x; });
      }
      case Node::Kind::binary: return binary(n, eval(n.args[0]), eval(n.args[1]));
      case Node::Kind::call: return call(n);
    }
    throw std::logic_error("unreachable");
  }

  template <class F>
  static Value map(Value v, F f) {
    if (auto* s = std::get_if<double>(&v)) return f(*s);
    auto& vec = std::get<std::vector<double>>(v);
    for (double& x : vec) x = f(x);
    return v;
  }

  static Value binary(const Node& n, Value a, Value b) {
    const char op = n.op;
    auto* as = std::get_if<double>(&a);
    auto* bs = std::get_if<double>(&b);
    if (as && bs) return apply_binary(op, *as, *bs);
    if (as) {
      auto out = std::get<std::vector<double>>(std::move(b));
      for (double& x : out) x = apply_binary(op, *as, x);
      return out;
    }
    auto out = std::get<std::vector<double>>(std::move(a));
    if (bs) {
      for (double& x : out) x = apply_binary(op, x, *bs);
      return out;
    }
    const auto& rhs = std::get<std::vector<double>>(b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = apply_binary(op, out[i], rhs[i]);
    return out;
  }

  Value call(const Node& n) {
    const Builtin* b = find_builtin(n.name);
    switch (b->category) {
      case BuiltinCategory::vocab_reduction: return vocab_reduce(n);
      case BuiltinCategory::elementwise: {
        Value v = eval(n.args[0]);
        if (auto* x = std::get_if<double>(&v)) {
          apply_elementwise(n, std::span<double>(x, 1));
        } else {
          apply_elementwise(n, std::get<std::vector<double>>(v));
        }
        return v;
      }
      case BuiltinCategory::sequence: return sequence_op(n);
      case BuiltinCategory::reduction: return reduce(n);
    }
    throw std::logic_error("unreachable");
  }

  std::vector<double> seq_arg(const Node& n) {
    length(n.args[0].type);
    return std::get<std::vector<double>>(eval(n.args[0]));
  }

  Value sequence_op(const Node& n) {
    const auto x = seq_arg(n);
    const std::size_t len = x.size();
    if (n.name == "diff" || n.name == "trim_end") {
      if (len < 2) throw InsufficientPositions{};
      std::vector<double> out(len - 1);
      for (std::size_t i = 0; i + 1 < len; ++i) out[i] = n.name == "diff" ? x[i + 1] - x[i] : x[i];
      return out;
    }
    // gradient: central differences inside, one-sided at both ends
    if (len < 2) throw InsufficientPositions{};
    std::vector<double> g(len);
    g[0] = x[1] - x[0];
    g[len - 1] = x[len - 1] - x[len - 2];
    for (std::size_t i = 1; i + 1 < len; ++i) g[i] = (x[i + 1] - x[i - 1]) / 2.0;
    return g;
  }

  Value reduce(const Node& n) {
    const auto x = seq_arg(n);
    if (x.empty()) throw InsufficientPositions{};
    const auto& f = n.name;
    const double count = static_cast<double>(x.size());
    if (f == "sum" || f == "mean") {
      double s = 0.0;
      for (double v : x) s += v;
      return f == "sum" ? s : s / count;
    }
    if (f == "min") return *std::min_element(x.begin(), x.end());
    if (f == "max") return *std::max_element(x.begin(), x.end());
    if (f == "min_k_mean" || f == "max_k_mean") {
      const auto m = selection_count(*constant_value(n.args[1]), x.size());
      return f == "min_k_mean" ? select_mean(x, m, std::less<>{}) : select_mean(x, m, std::greater<>{});
    }
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= count;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : x) {
      const double d = v - mean;
      m2 += d * d;
      m3 += d * d * d;
      m4 += d * d * d * d;
    }
    m2 /= count;
    m3 /= count;
    m4 /= count;
    if (f == "var") return m2;
    if (f == "std") return std::sqrt(m2);
    if (m2 == 0.0) return 0.0;
    if (f == "skew") return m3 / std::pow(m2, 1.5);
    return m4 / (m2 * m2) - 3.0;  // kurt
  }

  // Value of a non-matrix node at row i (scalars broadcast).
  double at_row(const Node& n, std::size_t i) const {
    const Value& v = *memo_[n.id];
    if (auto* s = std::get_if<double>(&v)) return *s;
    return std::get<std::vector<double>>(v)[i];
  }

  std::span<double> scratch(const Node& n) {
    auto& buf = scratch_[n.id];
    buf.resize(ctx_.vocab());
    return buf;
  }

  // Evaluates a matrix-typed node over row i into `out`. The left operand of
  // a binary node shares `out`; the right operand uses its own buffer.
  void row(const Node& n, std::size_t i, std::span<double> out) {
    switch (n.kind) {
      case Node::Kind::identifier: {
        const auto src = n.name == "P" ? ctx_.dist.prob_row(i) : ctx_.dist.log_prob_row(i);
        std::copy(src.begin(), src.end(), out.begin());
        return;
      }
      case Node::Kind::negate:
        row(n.args[0], i, out);
        for (double& x : out) x = -x;
        return;
      case Node::Kind::binary: {
        const Node& a = n.args[0];
        const Node& b = n.args[1];
        if (a.type.rank != Rank::matrix) {
          const double y = at_row(a, i);
          row(b, i, out);
          with_operator(n.op, [&](auto f) {
            for (double& x : out) x = f(y, x);
          });
        } else if (b.type.rank != Rank::matrix) {
          const double y = at_row(b, i);
          row(a, i, out);
          with_operator(n.op, [&](auto f) {
            for (double& x : out) x = f(x, y);
          });
        } else {
          row(a, i, out);
          auto rhs = scratch(b);
          row(b, i, rhs);
          with_operator(n.op, [&](auto f) {
            for (std::size_t j = 0; j < out.size(); ++j) out[j] = f(out[j], rhs[j]);
          });
        }
        return;
      }
      case Node::Kind::call:
        row(n.args[0], i, out);
        apply_elementwise(n, out);
        return;
      case Node::Kind::number: break;
    }
    throw std::logic_error("unreachable");
  }

  void prepare_matrix_operands(const Node& n) {
    if (n.type.rank != Rank::matrix) {
      eval(n);
      return;
    }
    for (const auto& a : n.args) prepare_matrix_operands(a);
  }

  Value vocab_reduce(const Node& n) {
    const Node& m = n.args[0];
    prepare_matrix_operands(m);
    const std::size_t rows = ctx_.positions();
    const auto& f = n.name;
    const double alpha = f == "renyi_v" ? *constant_value(n.args[1]) : 1.0;
    std::vector<double> out(rows);
    auto buf = scratch(m);
    for (std::size_t i = 0; i < rows; ++i) {
      row(m, i, buf);
      if (f == "max_v" || f == "max2_v") {
        double first = -std::numeric_limits<double>::infinity();
        double second = first;
        for (double x : buf) {
          if (x > first) {
            second = first;
            first = x;
          } else if (x > second) {
            second = x;
          }
        }
        out[i] = f == "max_v" ? first : second;
      } else if (f == "min_v") {
        double lo = std::numeric_limits<double>::infinity();
        for (double x : buf) lo = std::min(lo, x);
        out[i] = lo;
      } else if (f == "sum_v") {
        double s = 0.0;
        for (double x : buf) s += x;
        out[i] = s;
      } else if (f == "entropy_v" || (f == "renyi_v" && alpha == 1.0)) {
        double h = 0.0;
        for (double x : buf) {
          if (x > 0.0) h -= x * std::log(x);
        }
        out[i] = h;
      } else if (std::isinf(alpha)) {
        double hi = -std::numeric_limits<double>::infinity();
        for (double x : buf) hi = std::max(hi, x);
        out[i] = -std::log(hi);
      } else {
        double s = 0.0;
        if (alpha == 2.0) {
          for (double x : buf) {
            if (x > 0.0) s += x * x;
          }
        } else {
          for (double x : buf) {
            if (x > 0.0) s += std::pow(x, alpha);
          }
        }
        out[i] = std::log(s) / (1.0 - alpha);
      }
    }
    return out;
  }

  const Program& program_;
  const EvalContext& ctx_;
  std::vector<std::optional<Value>> memo_;
  std::vector<std::vector<double>> scratch_;
};

inline void require_ready(const Program& p) {
  if (!p.typed) throw std::logic_error("program has not been typechecked");
  if (p.cost_class != CostClass::ok) throw CostError(p.vocab_passes);
}

}  // namespace detail

/// Evaluates a scalar program on one record. Gradient programs on fewer than
/// three positions, or programs whose sequences shrink to nothing, yield the
/// 0.0 insufficient-positions sentinel. Non-finite results are reported as
/// ScoreStatus::non_finite.
inline Score evaluate(const Program& p, const EvalContext& ctx) {
  detail::require_ready(p);
  if (p.result_type.rank != Rank::scalar) {
    throw std::logic_error("evaluate() needs a scalar program; use evaluate_sequence()");
  }
  if (p.uses_targets && !ctx.targets_valid) return Score::not_applicable();
  if (p.uses_gradient && ctx.positions() < 3) return Score::insufficient();
  try {
    detail::Evaluator ev(p, ctx);
    return Score::of(std::get<double>(ev.eval(p.ast)));
  } catch (const detail::InsufficientPositions&) {
    return Score::insufficient();
  }
}

/// Evaluates a seq_vector program. Returns nullopt when positions are
/// insufficient.
inline std::optional<std::vector<double>> evaluate_sequence(const Program& p, const EvalContext& ctx) {
  detail::require_ready(p);
  if (p.result_type.rank != Rank::seq) throw std::logic_error("not a seq_vector program");
  if (p.uses_gradient && ctx.positions() < 3) return std::nullopt;
  try {
    detail::Evaluator ev(p, ctx);
    return std::get<std::vector<double>>(ev.eval(p.ast));
  } catch (const detail::InsufficientPositions&) {
    return std::nullopt;
  }
}

}  // namespace logitmia::dsl
