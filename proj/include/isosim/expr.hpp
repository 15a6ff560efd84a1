#pragma once

// Arithmetic expression language used for pair potentials and one-body
// fields in model files.
//
// Precedence, tightest first: `^` (right-associative), unary minus, `* /`,
// `+ -`. So `-x1^2` is `-(x1^2)` and `2^3^2` is `2^(3^2)`.

#include <array>
#include <charconv>
#include <cmath>
#include <map>
#include <memory>
#include <numbers>
#include <set>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "isosim/error.hpp"

namespace isosim::expr {

enum class TokenKind { number, identifier, op, left_paren, right_paren, comma, end };

struct Token {
  TokenKind kind;
  std::string text;
  std::size_t position;

  bool operator==(const Token&) const = default;
};

inline constexpr std::array<std::string_view, 8> kFunctions = {"sin",  "cos", "exp", "sqrt",
                                                                "abs", "tanh", "min", "max"};

inline bool is_function_name(std::string_view name) {
  for (auto f : kFunctions)
    if (f == name) return true;
  return false;
}

inline std::size_t function_arity(std::string_view name) {
  return (name == "min" || name == "max") ? 2 : 1;
}

/// `pi` and `e` are always available and never count as free variables.
inline bool is_implicit_constant(std::string_view name) { return name == "pi" || name == "e"; }

namespace detail {

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
inline bool is_ident_char(char c) { return is_ident_start(c) || is_digit(c); }
inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

}  // namespace detail

/// Splits `source` into tokens. The returned sequence always ends with a
/// single `TokenKind::end` marker whose position is `source.size()`.
inline std::vector<Token> tokenize(std::string_view source) {
  using namespace detail;
  std::vector<Token> tokens;
  std::size_t i = 0;
  const std::size_t n = source.size();
  while (i < n) {
    const char c = source[i];
    if (is_space(c)) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (is_digit(c) || (c == '.' && i + 1 < n && is_digit(source[i + 1]))) {
      while (i < n && is_digit(source[i])) ++i;
      if (i < n && source[i] == '.') {
        ++i;
        while (i < n && is_digit(source[i])) ++i;
      }
      if (i < n && (source[i] == 'e' || source[i] == 'E')) {
        ++i;
        if (i < n && (source[i] == '+' || source[i] == '-')) ++i;
        if (i >= n || !is_digit(source[i])) throw SyntaxError("malformed number: missing exponent digits", start);
        while (i < n && is_digit(source[i])) ++i;
      }
      if (i < n && (is_ident_char(source[i]) || source[i] == '.'))
        throw SyntaxError("malformed number", start);
      const std::string_view text = source.substr(start, i - start);
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
      if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value))
        throw SyntaxError("number out of range", start);
      tokens.push_back({TokenKind::number, std::string(text), start});
      continue;
    }
    if (is_ident_start(c)) {
      while (i < n && is_ident_char(source[i])) ++i;
      tokens.push_back({TokenKind::identifier, std::string(source.substr(start, i - start)), start});
      continue;
    }
    switch (c) {
      case '+':
      case '-':
      case '*':
      case '/':
      case '^':
        tokens.push_back({TokenKind::op, std::string(1, c), start});
        break;
      case '(':
        tokens.push_back({TokenKind::left_paren, "(", start});
        break;
      case ')':
        tokens.push_back({TokenKind::right_paren, ")", start});
        break;
      case ',':
        tokens.push_back({TokenKind::comma, ",", start});
        break;
      default:
        throw SyntaxError(std::string("unexpected character '") + c + "'", start);
    }
    ++i;
  }
  tokens.push_back({TokenKind::end, "", n});
  return tokens;
}

enum class NodeKind { constant, variable, negate, binary, call };

class Expr;
using Bindings = std::map<std::string, double, std::less<>>;

/// Immutable expression tree. Copies share structure; equality is structural.
class Expr {
 public:
  static Expr constant(double value) { return Expr(make(NodeKind::constant, value, {}, 0, {})); }
  static Expr variable(std::string name) { return Expr(make(NodeKind::variable, 0.0, std::move(name), 0, {})); }
  static Expr negate(Expr child) { return Expr(make(NodeKind::negate, 0.0, {}, 0, {std::move(child)})); }
  static Expr binary(char op, Expr lhs, Expr rhs) {
    return Expr(make(NodeKind::binary, 0.0, {}, op, {std::move(lhs), std::move(rhs)}));
  }
  static Expr call(std::string function, std::vector<Expr> args) {
    return Expr(make(NodeKind::call, 0.0, std::move(function), 0, std::move(args)));
  }

  Expr() : Expr(constant(0.0)) {}

  NodeKind kind() const noexcept { return node_->kind; }
  double value() const noexcept { return node_->value; }
  /// Variable name or function name.
  const std::string& name() const noexcept { return node_->name; }
  char op() const noexcept { return node_->op; }
  const std::vector<Expr>& children() const noexcept { return node_->children; }

  friend bool operator==(const Expr& a, const Expr& b) {
    if (a.node_ == b.node_) return true;
    if (a.kind() != b.kind()) return false;
    switch (a.kind()) {
      case NodeKind::constant:
        // Bitwise comparison so that 0.0 and -0.0 stay distinct.
        return std::signbit(a.value()) == std::signbit(b.value()) && a.value() == b.value();
      case NodeKind::variable:
        return a.name() == b.name();
      case NodeKind::binary:
        if (a.op() != b.op()) return false;
        break;
      case NodeKind::call:
        if (a.name() != b.name()) return false;
        break;
      case NodeKind::negate:
        break;
    }
    return a.children() == b.children();
  }

 private:
  struct Node {
    NodeKind kind;
    double value;
    std::string name;
    char op;
    std::vector<Expr> children;
  };

  static std::shared_ptr<const Node> make(NodeKind kind, double value, std::string name, char op,
                                          std::vector<Expr> children) {
    return std::make_shared<const Node>(Node{kind, value, std::move(name), op, std::move(children)});
  }

  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

  std::shared_ptr<const Node> node_;
};

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view source) : tokens_(tokenize(source)) {}

  Expr parse_all() {
    Expr result = parse_sum();
    if (peek().kind != TokenKind::end) fail("unexpected token '" + peek().text + "'");
    return result;
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }
  const Token& next() { return tokens_[pos_++]; }
  bool at_op(char op) const { return peek().kind == TokenKind::op && peek().text[0] == op; }

  [[noreturn]] void fail(const std::string& message) const {
    const Token& tok = peek();
    throw SyntaxError(tok.kind == TokenKind::end ? "unexpected end of input" : message, tok.position);
  }

  Expr parse_sum() {
    Expr lhs = parse_product();
    while (at_op('+') || at_op('-')) {
      const char op = next().text[0];
      lhs = Expr::binary(op, std::move(lhs), parse_product());
    }
    return lhs;
  }

  Expr parse_product() {
    Expr lhs = parse_unary();
    while (at_op('*') || at_op('/')) {
      const char op = next().text[0];
      lhs = Expr::binary(op, std::move(lhs), parse_unary());
    }
    return lhs;
  }

  Expr parse_unary() {
    if (at_op('-')) {
      next();
      return Expr::negate(parse_unary());
    }
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_primary();
    if (at_op('^')) {
      next();
      // The exponent may carry its own sign: 2^-x is 2^(-x).
      return Expr::binary('^', std::move(base), parse_unary());
    }
    return base;
  }

  Expr parse_primary() {
    const Token& tok = peek();
    switch (tok.kind) {
      case TokenKind::number: {
        next();
        double value = 0.0;
        std::from_chars(tok.text.data(), tok.text.data() + tok.text.size(), value);
        return Expr::constant(value);
      }
      case TokenKind::identifier: {
        next();
        if (peek().kind == TokenKind::left_paren) return parse_call(tok);
        if (is_function_name(tok.text))
          throw SyntaxError("function '" + tok.text + "' used without arguments", tok.position);
        return Expr::variable(tok.text);
      }
      case TokenKind::left_paren: {
        next();
        Expr inner = parse_sum();
        if (peek().kind != TokenKind::right_paren) fail("expected ')'");
        next();
        return inner;
      }
      default:
        fail("unexpected token '" + tok.text + "'");
    }
  }

  Expr parse_call(const Token& name) {
    if (!is_function_name(name.text)) throw SyntaxError("unknown function '" + name.text + "'", name.position);
    next();  // '('
    std::vector<Expr> args;
    if (peek().kind != TokenKind::right_paren) {
      args.push_back(parse_sum());
      while (peek().kind == TokenKind::comma) {
        next();
        args.push_back(parse_sum());
      }
    }
    if (peek().kind != TokenKind::right_paren) fail("expected ')' or ','");
    next();
    const std::size_t arity = function_arity(name.text);
    if (args.size() != arity)
      throw SyntaxError("function '" + name.text + "' expects " + std::to_string(arity) + " argument(s), got " +
                            std::to_string(args.size()),
                        name.position);
    return Expr::call(name.text, std::move(args));
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

inline int precedence(const Expr& e) {
  switch (e.kind()) {
    case NodeKind::binary:
      switch (e.op()) {
        case '+':
        case '-':
          return 1;
        case '*':
        case '/':
          return 2;
        default:
          return 4;
      }
    case NodeKind::negate:
      return 3;
    default:
      return 5;
  }
}

inline std::string format_number(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

inline void print_into(const Expr& e, std::string& out);

inline void print_child(const Expr& child, bool parens, std::string& out) {
  if (parens) out += '(';
  print_into(child, out);
  if (parens) out += ')';
}

inline void print_into(const Expr& e, std::string& out) {
  switch (e.kind()) {
    case NodeKind::constant:
      if (std::signbit(e.value())) {
        out += '(' + format_number(e.value()) + ')';
      } else {
        out += format_number(e.value());
      }
      return;
    case NodeKind::variable:
      out += e.name();
      return;
    case NodeKind::negate:
      out += '-';
      print_child(e.children()[0], precedence(e.children()[0]) < 3, out);
      return;
    case NodeKind::binary: {
      const int p = precedence(e);
      const Expr& lhs = e.children()[0];
      const Expr& rhs = e.children()[1];
      if (e.op() == '^') {
        print_child(lhs, precedence(lhs) <= p, out);
        out += '^';
        print_child(rhs, precedence(rhs) < p, out);
      } else {
        print_child(lhs, precedence(lhs) < p, out);
        out += e.op();
        print_child(rhs, precedence(rhs) <= p, out);
      }
      return;
    }
    case NodeKind::call:
      out += e.name();
      out += '(';
      for (std::size_t k = 0; k < e.children().size(); ++k) {
        if (k) out += ", ";
        print_into(e.children()[k], out);
      }
      out += ')';
      return;
  }
}

}  // namespace detail

inline Expr parse(std::string_view source) { return detail::Parser(source).parse_all(); }

/// Minimal-parenthesis rendering; `parse(to_string(e)) == e` for every tree
/// whose constants are non-negative (the only constants the parser makes).
inline std::string to_string(const Expr& e) {
  std::string out;
  detail::print_into(e, out);
  return out;
}

namespace detail {

inline double checked(double result, const Expr& e) {
  if (!std::isfinite(result)) throw EvaluationError("non-finite result in sub-expression '" + to_string(e) + "'");
  return result;
}

inline double eval_node(const Expr& e, const Bindings& bindings) {
  switch (e.kind()) {
    case NodeKind::constant:
      return e.value();
    case NodeKind::variable: {
      if (auto it = bindings.find(e.name()); it != bindings.end()) return it->second;
      if (e.name() == "pi") return std::numbers::pi;
      if (e.name() == "e") return std::numbers::e;
      throw EvaluationError("unbound variable '" + e.name() + "'");
    }
    case NodeKind::negate:
      return -eval_node(e.children()[0], bindings);
    case NodeKind::binary: {
      const double a = eval_node(e.children()[0], bindings);
      const double b = eval_node(e.children()[1], bindings);
      switch (e.op()) {
        case '+':
          return checked(a + b, e);
        case '-':
          return checked(a - b, e);
        case '*':
          return checked(a * b, e);
        case '/':
          return checked(a / b, e);
        default:
          return checked(std::pow(a, b), e);
      }
    }
    case NodeKind::call: {
      const std::string& f = e.name();
      const double a = eval_node(e.children()[0], bindings);
      if (f == "min") return std::min(a, eval_node(e.children()[1], bindings));
      if (f == "max") return std::max(a, eval_node(e.children()[1], bindings));
      if (f == "sin") return checked(std::sin(a), e);
      if (f == "cos") return checked(std::cos(a), e);
      if (f == "exp") return checked(std::exp(a), e);
      if (f == "sqrt") return checked(std::sqrt(a), e);
      if (f == "abs") return std::abs(a);
      return checked(std::tanh(a), e);
    }
  }
  return 0.0;
}

inline void collect_variables(const Expr& e, std::set<std::string>& out) {
  if (e.kind() == NodeKind::variable) {
    if (!is_implicit_constant(e.name())) out.insert(e.name());
    return;
  }
  for (const auto& child : e.children()) collect_variables(child, out);
}

}  // namespace detail

/// Evaluates `e` with real arithmetic. Throws EvaluationError on an unbound
/// variable or when any sub-expression is not finite.
inline double evaluate(const Expr& e, const Bindings& bindings) { return detail::eval_node(e, bindings); }

inline std::set<std::string> free_variables(const Expr& e) {
  std::set<std::string> out;
  detail::collect_variables(e, out);
  return out;
}

}  // namespace isosim::expr
