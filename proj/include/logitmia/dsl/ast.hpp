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

#include <charconv>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace logitmia::dsl {

enum class Rank { scalar = 0, seq = 1, matrix = 2 };

/// Static type of an expression. `shrink` is how many positions a sequence
/// has lost relative to N (diff and trim_end each drop one).
struct Type {
  Rank rank = Rank::scalar;
  std::size_t shrink = 0;

  friend bool operator==(const Type&, const Type&) = default;
};

inline std::string to_string(Rank r) {
  switch (r) {
    case Rank::scalar: return "scalar";
    case Rank::seq: return "seq_vector";
    case Rank::matrix: return "matrix";
  }
  return "?";
}

struct Node {
  enum class Kind { number, identifier, call, binary, negate };

  Kind kind = Kind::number;
  double number = 0.0;
  std::string name;  // identifier or function name
  char op = 0;       // '+', '-', '*', '/'
  std::vector<Node> args;
  std::size_t offset = 0;  // byte offset in the source

  // Filled in by typecheck.
  Type type;
  std::size_t id = 0;

  static Node make_number(double v, std::size_t at = 0) {
    Node n;
    n.kind = Kind::number;
    n.number = v;
    n.offset = at;
    return n;
  }
  static Node make_identifier(std::string name, std::size_t at = 0) {
    Node n;
    n.kind = Kind::identifier;
    n.name = std::move(name);
    n.offset = at;
    return n;
  }
  static Node make_call(std::string fn, std::vector<Node> args, std::size_t at = 0) {
    Node n;
    n.kind = Kind::call;
    n.name = std::move(fn);
    n.args = std::move(args);
    n.offset = at;
    return n;
  }
  static Node make_binary(char op, Node lhs, Node rhs, std::size_t at = 0) {
    Node n;
    n.kind = Kind::binary;
    n.op = op;
    n.args.push_back(std::move(lhs));
    n.args.push_back(std::move(rhs));
    n.offset = at;
    return n;
  }
  static Node make_negate(Node operand, std::size_t at = 0) {
    Node n;
    n.kind = Kind::negate;
    n.args.push_back(std::move(operand));
    n.offset = at;
    return n;
  }
};

/// Structural equality, ignoring source offsets and typecheck annotations.
inline bool same_tree(const Node& a, const Node& b) {
  if (a.kind != b.kind || a.name != b.name || a.op != b.op || a.args.size() != b.args.size()) {
    return false;
  }
  if (a.kind == Node::Kind::number && !(a.number == b.number)) return false;
  for (std::size_t i = 0; i < a.args.size(); ++i) {
    if (!same_tree(a.args[i], b.args[i])) return false;
  }
  return true;
}

inline std::string format_number(double v) {
  if (std::isinf(v)) return "inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

namespace detail {

inline int precedence(char op) { return (op == '+' || op == '-') ? 1 : 2; }

inline void print(const Node& n, std::string& out) {
  switch (n.kind) {
    case Node::Kind::number: out += format_number(n.number); return;
    case Node::Kind::identifier: out += n.name; return;
    case Node::Kind::negate: {
      out += '-';
      const bool wrap = n.args[0].kind == Node::Kind::binary;
      if (wrap) out += '(';
      print(n.args[0], out);
      if (wrap) out += ')';
      return;
    }
    case Node::Kind::call:
      out += n.name;
      out += '(';
      for (std::size_t i = 0; i < n.args.size(); ++i) {
        if (i) out += ", ";
        print(n.args[i], out);
      }
      out += ')';
      return;
    case Node::Kind::binary: {
      const int p = precedence(n.op);
      const auto& lhs = n.args[0];
      const auto& rhs = n.args[1];
      const bool wrap_l = lhs.kind == Node::Kind::binary && precedence(lhs.op) < p;
      const bool wrap_r = rhs.kind == Node::Kind::binary && precedence(rhs.op) <= p;
      if (wrap_l) out += '(';
      print(lhs, out);
      if (wrap_l) out += ')';
      out += ' ';
      out += n.op;
      out += ' ';
      if (wrap_r) out += '(';
      print(rhs, out);
      if (wrap_r) out += ')';
      return;
    }
  }
}

}  // namespace detail

/// Canonical source text for an AST; parsing it yields the same tree.
inline std::string pretty_print(const Node& n) {
  std::string out;
  detail::print(n, out);
  return out;
}

}  // namespace logitmia::dsl
