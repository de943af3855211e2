#pragma once

// Linear constant-coefficient operator in one space and one time dimension,
//
//   L = sum_{m,n} c_{m,n} d^m/dx^m d^n/dt^n,
//
// parsed from equations over the symbols u, u_x, u_t, u_xx, u_xt, ... An
// equation "A = B" normalizes to the coefficient map of A - B, so the stored
// operator satisfies L u = 0 for the homogeneous equation as written.

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dmodes/common.hpp"
#include "dmodes/expr.hpp"

namespace dmodes {

struct LinearOperator {
  // (m, n) -> c_{m,n}; m is the x-derivative order, n the t-derivative
  // order. Coefficients that normalize to exactly zero are not stored.
  std::map<std::pair<int, int>, Complex> coeff;
  int nx = 0;  // highest x order with a nonzero coefficient
  int nt = 0;  // highest t order with a nonzero coefficient

  // A_n(k) = sum_m c_{m,n} (ik)^m, the coefficient of d^n/dt^n after the
  // spatial transform.
  Complex time_symbol(int n, double k) const {
    Complex acc(0.0, 0.0);
    const Complex ik(0.0, k);
    for (const auto& [key, c] : coeff) {
      if (key.second != n) continue;
      Complex p(1.0, 0.0);
      for (int q = 0; q < key.first; ++q) p *= ik;
      acc += c * p;
    }
    return acc;
  }

  // True when the operator maps real u to real L u, i.e. all coefficients
  // are real.
  bool real_coefficients() const {
    for (const auto& [key, c] : coeff) {
      (void)key;
      if (c.imag() != 0.0) return false;
    }
    return true;
  }

  friend bool operator==(const LinearOperator& a, const LinearOperator& b) {
    return a.coeff == b.coeff;
  }
};

namespace detail {

// Value of a subexpression while parsing an operator equation: a linear
// combination of u-derivative symbols plus a constant part.
struct LinVal {
  std::map<std::pair<int, int>, Complex> terms;
  Complex constant;

  bool has_u() const { return !terms.empty(); }
};

inline bool parse_u_symbol(const std::string& name, int& m, int& n) {
  if (name.empty() || name[0] != 'u') return false;
  if (name.size() == 1) {
    m = 0;
    n = 0;
    return true;
  }
  if (name[1] != '_' || name.size() == 2) return false;
  m = 0;
  n = 0;
  for (std::size_t q = 2; q < name.size(); ++q) {
    if (name[q] == 'x') {
      ++m;
    } else if (name[q] == 't') {
      ++n;
    } else {
      throw ValidationError("unknown derivative symbol '" + name +
                            "' (suffix may contain only x and t)");
    }
  }
  return true;
}

class OperatorParser {
 public:
  OperatorParser(Lexer& lex, const std::map<std::string, Complex>& params)
      : lex_(lex), params_(params) {}

  LinVal parse_expr() {
    LinVal lhs = parse_term();
    while (lex_.peek().kind == TokKind::Plus ||
           lex_.peek().kind == TokKind::Minus) {
      bool add = lex_.take().kind == TokKind::Plus;
      LinVal rhs = parse_term();
      lhs.constant = add ? lhs.constant + rhs.constant
                         : lhs.constant - rhs.constant;
      for (const auto& [key, c] : rhs.terms) {
        lhs.terms[key] += add ? c : -c;
      }
    }
    return lhs;
  }

 private:
  LinVal parse_term() {
    Token at = lex_.peek();
    LinVal lhs = parse_unary();
    while (lex_.peek().kind == TokKind::Star ||
           lex_.peek().kind == TokKind::Slash) {
      bool mul = lex_.take().kind == TokKind::Star;
      Token rat = lex_.peek();
      LinVal rhs = parse_unary();
      if (mul) {
        if (lhs.has_u() && rhs.has_u()) {
          parse_fail(rat, "nonlinear term: product of two u factors");
        }
        if (rhs.has_u()) std::swap(lhs, rhs);
        // lhs carries the u content (if any), rhs is constant
        Complex f = rhs.constant;
        lhs.constant *= f;
        for (auto& [key, c] : lhs.terms) {
          (void)key;
          c *= f;
        }
      } else {
        if (rhs.has_u()) {
          parse_fail(rat, "division by a u term is not linear");
        }
        if (rhs.constant == 0.0) parse_fail(rat, "division by zero");
        lhs.constant /= rhs.constant;
        for (auto& [key, c] : lhs.terms) {
          (void)key;
          c /= rhs.constant;
        }
      }
    }
    (void)at;
    return lhs;
  }

  LinVal parse_unary() {
    if (lex_.peek().kind == TokKind::Plus) {
      lex_.take();
      return parse_unary();
    }
    if (lex_.peek().kind == TokKind::Minus) {
      lex_.take();
      LinVal v = parse_unary();
      v.constant = -v.constant;
      for (auto& [key, c] : v.terms) {
        (void)key;
        c = -c;
      }
      return v;
    }
    return parse_power();
  }

  LinVal parse_power() {
    Token at = lex_.peek();
    LinVal base = parse_primary();
    if (lex_.peek().kind == TokKind::Caret) {
      Token caret = lex_.take();
      LinVal expo = parse_unary();
      if (base.has_u() || expo.has_u()) {
        parse_fail(caret, "u terms may not appear inside '^'");
      }
      LinVal out;
      out.constant = cpow(base.constant, expo.constant);
      return out;
    }
    (void)at;
    return base;
  }

  LinVal parse_primary() {
    Token tok = lex_.take();
    LinVal out;
    if (tok.kind == TokKind::Number) {
      out.constant = Complex(tok.number, 0.0);
      return out;
    }
    if (tok.kind == TokKind::LParen) {
      out = parse_expr();
      if (lex_.peek().kind != TokKind::RParen) {
        parse_fail(lex_.peek(), "expected ')'");
      }
      lex_.take();
      return out;
    }
    if (tok.kind != TokKind::Ident) {
      parse_fail(tok, "expected a number, name, or '('");
    }
    if (lex_.peek().kind == TokKind::LParen) {
      Func f;
      int arity = 0;
      if (!lookup_function(tok.text, f, arity)) {
        parse_fail(tok, "unknown function '" + tok.text + "'");
      }
      lex_.take();
      std::vector<Complex> args;
      if (lex_.peek().kind != TokKind::RParen) {
        args.push_back(parse_const_arg());
        while (lex_.peek().kind == TokKind::Comma) {
          lex_.take();
          args.push_back(parse_const_arg());
        }
      }
      if (lex_.peek().kind != TokKind::RParen) {
        parse_fail(lex_.peek(), "expected ')' in call");
      }
      lex_.take();
      if (static_cast<int>(args.size()) != arity) {
        parse_fail(tok, "function '" + tok.text + "' takes " +
                            std::to_string(arity) + " argument(s)");
      }
      out.constant = apply_function(f, args);
      return out;
    }
    int m = 0;
    int n = 0;
    if (parse_u_symbol(tok.text, m, n)) {
      out.terms[{m, n}] = Complex(1.0, 0.0);
      return out;
    }
    if (tok.text == "pi") {
      out.constant = Complex(kPi, 0.0);
      return out;
    }
    if (tok.text == "i") {
      out.constant = Complex(0.0, 1.0);
      return out;
    }
    if (tok.text == "x" || tok.text == "t") {
      parse_fail(tok, "operator coefficients must be constant ('" + tok.text +
                          "' is not allowed)");
    }
    auto it = params_.find(tok.text);
    if (it != params_.end()) {
      out.constant = it->second;
      return out;
    }
    parse_fail(tok, "unbound parameter '" + tok.text + "'");
  }

  Complex parse_const_arg() {
    Token at = lex_.peek();
    LinVal v = parse_expr();
    if (v.has_u()) parse_fail(at, "u terms may not appear inside a function");
    return v.constant;
  }

  Lexer& lex_;
  const std::map<std::string, Complex>& params_;
};

}  // namespace detail

// Parses "LHS = RHS" into the coefficient map of LHS - RHS. Requires at
// least one time derivative to survive normalization.
inline LinearOperator parse_operator(
    const std::string& text,
    const std::map<std::string, Complex>& params = {}) {
  detail::Lexer lex(text);
  detail::OperatorParser parser(lex, params);
  detail::LinVal lhs = parser.parse_expr();
  if (lex.peek().kind != detail::TokKind::Equal) {
    detail::parse_fail(lex.peek(), "operator equation needs '='");
  }
  lex.take();
  detail::LinVal rhs = parser.parse_expr();
  if (lex.peek().kind != detail::TokKind::End) {
    detail::parse_fail(lex.peek(), "unexpected trailing input");
  }

  Complex constant = lhs.constant - rhs.constant;
  if (constant != 0.0) {
    throw ValidationError(
        "operator equation has a nonzero constant term after normalization");
  }
  LinearOperator op;
  for (const auto& [key, c] : lhs.terms) {
    if (c != 0.0) op.coeff[key] = c;
  }
  for (const auto& [key, c] : rhs.terms) {
    auto it = op.coeff.find(key);
    Complex v = (it != op.coeff.end() ? it->second : Complex(0.0, 0.0)) - c;
    if (v == 0.0) {
      if (it != op.coeff.end()) op.coeff.erase(it);
    } else {
      op.coeff[key] = v;
    }
  }
  for (const auto& [key, c] : op.coeff) {
    (void)c;
    if (key.first > op.nx) op.nx = key.first;
    if (key.second > op.nt) op.nt = key.second;
  }
  if (op.coeff.empty() || op.nt == 0) {
    throw ValidationError(
        "operator has time order N_t = 0 after normalization; at least one "
        "u_t... term must survive");
  }
  return op;
}

namespace detail {

inline std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// Canonical text form; parse_operator(render_operator(op)) == op exactly.
inline std::string render_operator(const LinearOperator& op) {
  std::string out;
  for (const auto& [key, c] : op.coeff) {
    if (!out.empty()) out += " + ";
    out += "(";
    if (c.imag() == 0.0) {
      out += detail::format_g17(c.real());
    } else if (c.real() == 0.0) {
      out += detail::format_g17(c.imag()) + "*i";
    } else {
      out += detail::format_g17(c.real());
      out += c.imag() < 0.0 ? " - " : " + ";
      out += detail::format_g17(std::abs(c.imag())) + "*i";
    }
    out += ")*u";
    if (key.first > 0 || key.second > 0) {
      out += "_";
      out.append(static_cast<std::size_t>(key.first), 'x');
      out.append(static_cast<std::size_t>(key.second), 't');
    }
  }
  out += " = 0";
  return out;
}

}  // namespace dmodes
