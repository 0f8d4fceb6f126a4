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

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "logitmia/dsl/ast.hpp"
#include "logitmia/dsl/builtins.hpp"
#include "logitmia/dsl/parser.hpp"

namespace logitmia::dsl {

inline constexpr int kMaxVocabPasses = 4;

class TypeError : public std::runtime_error {
 public:
  TypeError(std::size_t offset, std::string node, const std::string& message)
      : std::runtime_error("type error at byte " + std::to_string(offset) + " (" + node +
                           "): " + message),
        offset_(offset),
        node_(std::move(node)) {}

  std::size_t offset() const { return offset_; }
  const std::string& node() const { return node_; }

 private:
  std::size_t offset_;
  std::string node_;
};

enum class CostClass { ok, rejected };

struct Program {
  std::string source;
  Node ast;
  Type result_type;
  int vocab_passes = 0;
  CostClass cost_class = CostClass::ok;
  bool uses_targets = false;
  bool uses_gradient = false;
  std::size_t node_count = 0;
  bool typed = false;
};

/// Value of a constant subexpression (numbers, unary minus and arithmetic).
inline std::optional<double> constant_value(const Node& n) {
  switch (n.kind) {
    case Node::Kind::number: return n.number;
    case Node::Kind::negate: {
      auto v = constant_value(n.args[0]);
      if (!v) return std::nullopt;
      return -*v;
    }
    case Node::Kind::binary: {
      auto a = constant_value(n.args[0]);
      auto b = constant_value(n.args[1]);
      if (!a || !b) return std::nullopt;
      switch (n.op) {
        case '+': return *a + *b;
        case '-': return *a - *b;
        case '*': return *a * *b;
        default: return *a / *b;
      }
    }
    default: return std::nullopt;
  }
}

namespace detail {

class Checker {
 public:
  explicit Checker(Program& p) : program_(p) {}

  void run() {
    check(program_.ast);
    program_.node_count = next_id_;
  }

 private:
  static std::string label(const Node& n) {
    switch (n.kind) {
      case Node::Kind::number: return "literal " + format_number(n.number);
      case Node::Kind::identifier: return "identifier " + n.name;
      case Node::Kind::call: return n.name + "(...)";
      case Node::Kind::binary: return std::string("operator ") + n.op;
      case Node::Kind::negate: return "unary -";
    }
    return "?";
  }

  [[noreturn]] static void fail(const Node& n, const std::string& msg) {
    throw TypeError(n.offset, label(n), msg);
  }

  double require_constant(const Node& call, const Node& arg, const char* what) {
    auto v = constant_value(arg);
    if (!v) fail(call, std::string(what) + " must be a constant");
    return *v;
  }

  Type check(Node& n) {
    n.id = next_id_++;
    Type t;
    switch (n.kind) {
      case Node::Kind::number:
        t = {Rank::scalar, 0};
        break;
      case Node::Kind::identifier: {
        const auto* id = find_identifier(n.name);
        if (!id) fail(n, "unknown identifier");
        if (id->reads_targets) program_.uses_targets = true;
        t = {id->matrix ? Rank::matrix : Rank::seq, 0};
        break;
      }
      case Node::Kind::negate:
        t = check(n.args[0]);
        break;
      case Node::Kind::binary:
        t = combine(n, check(n.args[0]), check(n.args[1]));
        break;
      case Node::Kind::call:
        t = check_call(n);
        break;
    }
    n.type = t;
    return t;
  }

  Type combine(const Node& n, Type a, Type b) {
    if (a.rank == Rank::scalar) return b;
    if (b.rank == Rank::scalar) return a;
    if (a.rank == Rank::seq && b.rank == Rank::seq) {
      if (a.shrink != b.shrink) fail(n, "sequence operands have different lengths");
      return a;
    }
    const Type& s = a.rank == Rank::seq ? a : b;
    if (s.rank == Rank::seq && s.shrink != 0) {
      fail(n, "a shortened sequence cannot broadcast over matrix rows");
    }
    return {Rank::matrix, 0};
  }

  Type check_call(Node& n) {
    const Builtin* b = find_builtin(n.name);
    if (!b) fail(n, "unknown function");
    if (n.args.size() != b->arity) {
      fail(n, n.name + " takes " + std::to_string(b->arity) + " argument(s), got " +
                  std::to_string(n.args.size()));
    }
    std::vector<Type> arg_types;
    for (auto& a : n.args) arg_types.push_back(check(a));
    const Type& x = arg_types[0];
    for (std::size_t i = 1; i < n.args.size(); ++i) {
      if (arg_types[i].rank != Rank::scalar) fail(n, "extra arguments must be scalar constants");
    }

    switch (b->category) {
      case BuiltinCategory::vocab_reduction:
        if (x.rank != Rank::matrix) {
          fail(n, n.name + " needs a matrix argument, got " + to_string(x.rank));
        }
        if (n.name == "renyi_v") {
          const double alpha = require_constant(n, n.args[1], "Renyi order");
          if (!(alpha > 0.0)) fail(n, "Renyi order must be positive");
        }
        program_.vocab_passes += b->vocab_passes;
        return {Rank::seq, 0};
      case BuiltinCategory::elementwise:
        if (n.name == "pow") require_constant(n, n.args[1], "exponent");
        if (n.name == "clamp") {
          const double lo = require_constant(n, n.args[1], "lower bound");
          const double hi = require_constant(n, n.args[2], "upper bound");
          if (lo > hi) fail(n, "clamp bounds are reversed");
        }
        return x;
      case BuiltinCategory::sequence:
        if (x.rank != Rank::seq) {
          fail(n, n.name + " needs a seq_vector argument, got " + to_string(x.rank));
        }
        if (n.name == "gradient") {
          program_.uses_gradient = true;
          return x;
        }
        return {Rank::seq, x.shrink + 1};
      case BuiltinCategory::reduction:
        if (x.rank != Rank::seq) {
          fail(n, n.name + " reduces a seq_vector, got " + to_string(x.rank));
        }
        if (n.args.size() == 2) {
          const double k = require_constant(n, n.args[1], "k percent");
          if (!(k >= 0.0 && k <= 100.0)) fail(n, "k percent must lie in [0, 100]");
        }
        return {Rank::scalar, 0};
    }
    fail(n, "unhandled builtin");
  }

  Program& program_;
  std::size_t next_id_ = 0;
};

}  // namespace detail

/// Parses source text into an untyped Program. Throws ParseError.
inline Program parse(std::string_view source) {
  Program p;
  p.source = std::string(source);
  p.ast = parse_expression(source);
  return p;
}

/// Assigns types, node ids and the cost class. Throws TypeError. Programs
/// must produce a scalar or a seq_vector; more than kMaxVocabPasses vocab
/// reductions marks the program rejected.
inline Program typecheck(Program p) {
  p.vocab_passes = 0;
  p.uses_targets = false;
  p.uses_gradient = false;
  detail::Checker(p).run();
  p.result_type = p.ast.type;
  if (p.result_type.rank == Rank::matrix) {
    throw TypeError(p.ast.offset, "program", "program must reduce over the vocabulary axis");
  }
  p.cost_class = p.vocab_passes <= kMaxVocabPasses ? CostClass::ok : CostClass::rejected;
  p.typed = true;
  return p;
}

class CostError : public std::runtime_error {
 public:
  explicit CostError(int passes)
      : std::runtime_error("program uses " + std::to_string(passes) +
                           " vocab passes; the limit is " + std::to_string(kMaxVocabPasses)) {}
};

/// parse + typecheck, requiring a scalar program within the cost budget.
inline Program compile(std::string_view source) {
  Program p = typecheck(parse(source));
  if (p.result_type.rank != Rank::scalar) {
    throw TypeError(p.ast.offset, "program", "strategy programs must produce a scalar");
  }
  if (p.cost_class != CostClass::ok) throw CostError(p.vocab_passes);
  return p;
}

}  // namespace logitmia::dsl
