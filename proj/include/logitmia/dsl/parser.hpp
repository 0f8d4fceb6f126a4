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

/// Grammar:
///
///     expr    := term (('+' | '-') term)*
///     term    := unary (('*' | '/') unary)*
///     unary   := '-' unary | primary
///     primary := number | 'inf' | ident | func '(' expr (',' expr)* ')' | '(' expr ')'

#include <cctype>
#include <charconv>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "logitmia/dsl/ast.hpp"
#include "logitmia/dsl/builtins.hpp"

namespace logitmia::dsl {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t offset, std::vector<std::string> expected, const std::string& message)
      : std::runtime_error("parse error at byte " + std::to_string(offset) + ": " + message),
        offset_(offset),
        expected_(std::move(expected)) {}

  std::size_t offset() const { return offset_; }
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  std::size_t offset_;
  std::vector<std::string> expected_;
};

namespace detail {

struct Token {
  enum class Kind { number, name, symbol, end };
  Kind kind = Kind::end;
  std::string text;
  double value = 0.0;
  std::size_t offset = 0;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    Token t;
    t.offset = pos_;
    if (pos_ >= src_.size()) return t;
    const char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      double v = 0.0;
      auto [end, ec] = std::from_chars(src_.data() + pos_, src_.data() + src_.size(), v);
      if (ec != std::errc() || end == src_.data() + pos_) {
        throw ParseError(pos_, {"number"}, "malformed number");
      }
      t.kind = Token::Kind::number;
      t.value = v;
      t.text.assign(src_.data() + pos_, end);
      pos_ = static_cast<std::size_t>(end - src_.data());
      return t;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const auto start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
        ++pos_;
      }
      t.kind = Token::Kind::name;
      t.text = std::string(src_.substr(start, pos_ - start));
      return t;
    }
    if (std::string_view("+-*/(),").find(c) != std::string_view::npos) {
      t.kind = Token::Kind::symbol;
      t.text = std::string(1, c);
      ++pos_;
      return t;
    }
    throw ParseError(pos_, {"expression"}, std::string("unexpected character '") + c + "'");
  }

 private:
  std::string_view src_;
  std::size_t pos_ = 0;
};

class Parser {
 public:
  explicit Parser(std::string_view src) : lexer_(src) { advance(); }

  Node parse_program() {
    Node n = expr();
    if (cur_.kind != Token::Kind::end) {
      throw ParseError(cur_.offset, {"+", "-", "*", "/", "end of input"},
                       "unexpected '" + cur_.text + "'");
    }
    return n;
  }

 private:
  void advance() { cur_ = lexer_.next(); }
  bool at_symbol(char c) const { return cur_.kind == Token::Kind::symbol && cur_.text[0] == c; }

  void expect_symbol(char c) {
    if (!at_symbol(c)) {
      throw ParseError(cur_.offset, {std::string(1, c)},
                       std::string("expected '") + c + "', found " + describe(cur_));
    }
    advance();
  }

  static std::string describe(const Token& t) {
    return t.kind == Token::Kind::end ? "end of input" : "'" + t.text + "'";
  }

  Node expr() {
    Node lhs = term();
    while (at_symbol('+') || at_symbol('-')) {
      const char op = cur_.text[0];
      const auto at = cur_.offset;
      advance();
      lhs = Node::make_binary(op, std::move(lhs), term(), at);
    }
    return lhs;
  }

  Node term() {
    Node lhs = unary();
    while (at_symbol('*') || at_symbol('/')) {
      const char op = cur_.text[0];
      const auto at = cur_.offset;
      advance();
      lhs = Node::make_binary(op, std::move(lhs), unary(), at);
    }
    return lhs;
  }

  Node unary() {
    if (at_symbol('-')) {
      const auto at = cur_.offset;
      advance();
      return Node::make_negate(unary(), at);
    }
    return primary();
  }

  Node primary() {
    const Token t = cur_;
    switch (t.kind) {
      case Token::Kind::number:
        advance();
        return Node::make_number(t.value, t.offset);
      case Token::Kind::name: {
        advance();
        if (t.text == "inf") return Node::make_number(std::numeric_limits<double>::infinity(), t.offset);
        if (at_symbol('(')) {
          if (!find_builtin(t.text)) {
            throw ParseError(t.offset, {"builtin function"}, "unknown function `" + t.text + "`");
          }
          advance();
          std::vector<Node> args;
          args.push_back(expr());
          while (at_symbol(',')) {
            advance();
            args.push_back(expr());
          }
          expect_symbol(')');
          return Node::make_call(t.text, std::move(args), t.offset);
        }
        if (!find_identifier(t.text)) {
          throw ParseError(t.offset, {"P", "LP", "Y", "TP", "TLP"},
                           "unknown identifier `" + t.text + "`");
        }
        return Node::make_identifier(t.text, t.offset);
      }
      case Token::Kind::symbol:
        if (t.text[0] == '(') {
          advance();
          Node inner = expr();
          expect_symbol(')');
          return inner;
        }
        [[fallthrough]];
      case Token::Kind::end:
        break;
    }
    throw ParseError(t.offset, {"number", "identifier", "function call", "("},
                     "expected an expression, found " + describe(t));
  }

  Lexer lexer_;
  Token cur_;
};

}  // namespace detail

/// Parses DSL source into an untyped AST. Throws ParseError.
inline Node parse_expression(std::string_view source) {
  return detail::Parser(source).parse_program();
}

}  // namespace logitmia::dsl
