#pragma once

// Expression language used for initial conditions, sources, and numeric
// parameters.
//
//   expr   := term (('+' | '-') term)*
//   term   := unary (('*' | '/') unary)*
//   unary  := ('+' | '-')* power
//   power  := primary ('^' unary)?          (right associative)
//   primary:= number | ident | ident '(' expr {',' expr} ')' | '(' expr ')'
//
// Builtin constants: pi, i. Builtin functions: exp, sin, cos, sqrt, erf,
// and gauss(x, x0, w) = exp(-(x - x0)^2 / (2 w^2)). The free variables x
// and t are bound at evaluation time; named parameters are substituted at
// compile time. Values are complex throughout.

#include <cctype>
#include <cmath>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dmodes/common.hpp"

namespace dmodes {

namespace detail {

enum class TokKind {
  Number,
  Ident,
  Plus,
  Minus,
  Star,
  Slash,
  Caret,
  Equal,
  LParen,
  RParen,
  Comma,
  End,
};

struct Token {
  TokKind kind = TokKind::End;
  double number = 0.0;
  std::string text;
  int line = 1;
  int col = 1;
};

[[noreturn]] inline void parse_fail(const Token& at, const std::string& msg) {
  throw ValidationError("parse error at line " + std::to_string(at.line) +
                        ", column " + std::to_string(at.col) + ": " + msg);
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) { next(); }

  const Token& peek() const { return tok_; }

  Token take() {
    Token t = tok_;
    next();
    return t;
  }

 private:
  void next() {
    while (pos_ < src_.size() && is_space(src_[pos_])) step();
    tok_ = Token{};
    tok_.line = line_;
    tok_.col = col_;
    if (pos_ >= src_.size()) {
      tok_.kind = TokKind::End;
      return;
    }
    char c = src_[pos_];
    switch (c) {
      case '+': tok_.kind = TokKind::Plus; step(); return;
      case '-': tok_.kind = TokKind::Minus; step(); return;
      case '*': tok_.kind = TokKind::Star; step(); return;
      case '/': tok_.kind = TokKind::Slash; step(); return;
      case '^': tok_.kind = TokKind::Caret; step(); return;
      case '=': tok_.kind = TokKind::Equal; step(); return;
      case '(': tok_.kind = TokKind::LParen; step(); return;
      case ')': tok_.kind = TokKind::RParen; step(); return;
      case ',': tok_.kind = TokKind::Comma; step(); return;
      default: break;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      lex_number();
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
              src_[pos_] == '_')) {
        step();
      }
      tok_.kind = TokKind::Ident;
      tok_.text = std::string(src_.substr(start, pos_ - start));
      return;
    }
    parse_fail(tok_, std::string("unexpected character '") + c + "'");
  }

  void lex_number() {
    std::size_t start = pos_;
    while (pos_ < src_.size() &&
           std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
      step();
    }
    if (pos_ < src_.size() && src_[pos_] == '.') {
      step();
      while (pos_ < src_.size() &&
             std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        step();
      }
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t mark = pos_;
      step();
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) step();
      if (pos_ < src_.size() &&
          std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        while (pos_ < src_.size() &&
               std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
          step();
        }
      } else {
        pos_ = mark;  // 'e' belongs to a following identifier, not the number
      }
    }
    std::string text(src_.substr(start, pos_ - start));
    if (text == ".") parse_fail(tok_, "malformed number");
    tok_.kind = TokKind::Number;
    tok_.number = std::stod(text);
  }

  static bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n';
  }

  void step() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
  Token tok_;
};

enum class Func { Exp, Sin, Cos, Sqrt, Erf, Gauss };

inline bool lookup_function(const std::string& name, Func& f, int& arity) {
  if (name == "exp") { f = Func::Exp; arity = 1; return true; }
  if (name == "sin") { f = Func::Sin; arity = 1; return true; }
  if (name == "cos") { f = Func::Cos; arity = 1; return true; }
  if (name == "sqrt") { f = Func::Sqrt; arity = 1; return true; }
  if (name == "erf") { f = Func::Erf; arity = 1; return true; }
  if (name == "gauss") { f = Func::Gauss; arity = 3; return true; }
  return false;
}

inline Complex apply_function(Func f, const std::vector<Complex>& args) {
  switch (f) {
    case Func::Exp: return std::exp(args[0]);
    case Func::Sin: return std::sin(args[0]);
    case Func::Cos: return std::cos(args[0]);
    case Func::Sqrt: return std::sqrt(args[0]);
    case Func::Erf: {
      const Complex& z = args[0];
      if (std::abs(z.imag()) > 1e-12 * (1.0 + std::abs(z.real()))) {
        throw NumericalError("erf of a complex argument is not supported");
      }
      return Complex(std::erf(z.real()), 0.0);
    }
    case Func::Gauss: {
      Complex d = args[0] - args[1];
      Complex w = args[2];
      return std::exp(-(d * d) / (2.0 * w * w));
    }
  }
  throw NumericalError("unknown function id");
}

// Complex power with an exact path for small integer exponents so that
// expressions like x^2 stay real for negative real bases.
inline Complex cpow(const Complex& base, const Complex& expo) {
  if (expo.imag() == 0.0) {
    double er = expo.real();
    double ri = std::round(er);
    if (er == ri && std::abs(ri) <= 64.0) {
      long n = static_cast<long>(ri);
      if (n == 0) return Complex(1.0, 0.0);
      Complex acc(1.0, 0.0);
      Complex b = base;
      long m = n < 0 ? -n : n;
      for (long q = 0; q < m; ++q) acc *= b;
      return n < 0 ? Complex(1.0, 0.0) / acc : acc;
    }
  }
  return std::pow(base, expo);
}

}  // namespace detail

class Expr {
 public:
  Expr() = default;

  static Expr compile(const std::string& src,
                      const std::map<std::string, Complex>& params = {}) {
    detail::Lexer lex(src);
    Expr e;
    e.src_ = src;
    e.root_ = parse_expr(lex, params);
    if (lex.peek().kind != detail::TokKind::End) {
      detail::parse_fail(lex.peek(), "unexpected trailing input");
    }
    e.has_root_ = true;
    return e;
  }

  Complex operator()(double x, double t) const {
    if (!has_root_) throw ValidationError("evaluating an empty expression");
    return eval(root_, x, t);
  }

  bool valid() const { return has_root_; }
  bool depends_on_x() const { return has_root_ && depends(root_, Kind::VarX); }
  bool depends_on_t() const { return has_root_ && depends(root_, Kind::VarT); }

  bool is_constant_zero() const {
    return has_root_ && root_.kind == Kind::Const && root_.value == 0.0;
  }

  const std::string& source() const { return src_; }

 private:
  enum class Kind { Const, VarX, VarT, Add, Sub, Mul, Div, Pow, Neg, Call };

  struct Node {
    Kind kind = Kind::Const;
    Complex value;
    detail::Func func = detail::Func::Exp;
    std::vector<Node> kids;
  };

  static Node make_const(Complex v) {
    Node n;
    n.kind = Kind::Const;
    n.value = v;
    return n;
  }

  static Node fold(Node n) {
    if (n.kind == Kind::Const || n.kind == Kind::VarX || n.kind == Kind::VarT) {
      return n;
    }
    bool all_const = true;
    for (const Node& kid : n.kids) {
      if (kid.kind != Kind::Const) {
        all_const = false;
        break;
      }
    }
    if (!all_const) return n;
    if (n.kind == Kind::Call && n.func == detail::Func::Erf) return n;
    return make_const(eval(n, 0.0, 0.0));
  }

  static Node parse_expr(detail::Lexer& lex,
                         const std::map<std::string, Complex>& params) {
    using detail::TokKind;
    Node lhs = parse_term(lex, params);
    while (lex.peek().kind == TokKind::Plus ||
           lex.peek().kind == TokKind::Minus) {
      bool add = lex.take().kind == TokKind::Plus;
      Node rhs = parse_term(lex, params);
      Node n;
      n.kind = add ? Kind::Add : Kind::Sub;
      n.kids.push_back(std::move(lhs));
      n.kids.push_back(std::move(rhs));
      lhs = fold(std::move(n));
    }
    return lhs;
  }

  static Node parse_term(detail::Lexer& lex,
                         const std::map<std::string, Complex>& params) {
    using detail::TokKind;
    Node lhs = parse_unary(lex, params);
    while (lex.peek().kind == TokKind::Star ||
           lex.peek().kind == TokKind::Slash) {
      bool mul = lex.take().kind == TokKind::Star;
      Node rhs = parse_unary(lex, params);
      Node n;
      n.kind = mul ? Kind::Mul : Kind::Div;
      n.kids.push_back(std::move(lhs));
      n.kids.push_back(std::move(rhs));
      lhs = fold(std::move(n));
    }
    return lhs;
  }

  static Node parse_unary(detail::Lexer& lex,
                          const std::map<std::string, Complex>& params) {
    using detail::TokKind;
    if (lex.peek().kind == TokKind::Plus) {
      lex.take();
      return parse_unary(lex, params);
    }
    if (lex.peek().kind == TokKind::Minus) {
      lex.take();
      Node n;
      n.kind = Kind::Neg;
      n.kids.push_back(parse_unary(lex, params));
      return fold(std::move(n));
    }
    return parse_power(lex, params);
  }

  static Node parse_power(detail::Lexer& lex,
                          const std::map<std::string, Complex>& params) {
    using detail::TokKind;
    Node base = parse_primary(lex, params);
    if (lex.peek().kind == TokKind::Caret) {
      lex.take();
      Node expo = parse_unary(lex, params);
      Node n;
      n.kind = Kind::Pow;
      n.kids.push_back(std::move(base));
      n.kids.push_back(std::move(expo));
      return fold(std::move(n));
    }
    return base;
  }

  static Node parse_primary(detail::Lexer& lex,
                            const std::map<std::string, Complex>& params) {
    using detail::TokKind;
    detail::Token tok = lex.take();
    if (tok.kind == TokKind::Number) return make_const(Complex(tok.number, 0));
    if (tok.kind == TokKind::LParen) {
      Node inner = parse_expr(lex, params);
      if (lex.peek().kind != TokKind::RParen) {
        detail::parse_fail(lex.peek(), "expected ')'");
      }
      lex.take();
      return inner;
    }
    if (tok.kind != TokKind::Ident) {
      detail::parse_fail(tok, "expected a number, name, or '('");
    }
    if (lex.peek().kind == TokKind::LParen) {
      detail::Func f;
      int arity = 0;
      if (!detail::lookup_function(tok.text, f, arity)) {
        detail::parse_fail(tok, "unknown function '" + tok.text + "'");
      }
      lex.take();
      Node n;
      n.kind = Kind::Call;
      n.func = f;
      if (lex.peek().kind != TokKind::RParen) {
        n.kids.push_back(parse_expr(lex, params));
        while (lex.peek().kind == TokKind::Comma) {
          lex.take();
          n.kids.push_back(parse_expr(lex, params));
        }
      }
      if (lex.peek().kind != TokKind::RParen) {
        detail::parse_fail(lex.peek(), "expected ')' in call");
      }
      lex.take();
      if (static_cast<int>(n.kids.size()) != arity) {
        detail::parse_fail(tok, "function '" + tok.text + "' takes " +
                                    std::to_string(arity) + " argument(s)");
      }
      return fold(std::move(n));
    }
    if (tok.text == "x") {
      Node n;
      n.kind = Kind::VarX;
      return n;
    }
    if (tok.text == "t") {
      Node n;
      n.kind = Kind::VarT;
      return n;
    }
    if (tok.text == "pi") return make_const(Complex(kPi, 0.0));
    if (tok.text == "i") return make_const(Complex(0.0, 1.0));
    auto it = params.find(tok.text);
    if (it != params.end()) return make_const(it->second);
    detail::parse_fail(tok, "unbound parameter '" + tok.text + "'");
  }

  static Complex eval(const Node& n, double x, double t) {
    switch (n.kind) {
      case Kind::Const: return n.value;
      case Kind::VarX: return Complex(x, 0.0);
      case Kind::VarT: return Complex(t, 0.0);
      case Kind::Add: return eval(n.kids[0], x, t) + eval(n.kids[1], x, t);
      case Kind::Sub: return eval(n.kids[0], x, t) - eval(n.kids[1], x, t);
      case Kind::Mul: return eval(n.kids[0], x, t) * eval(n.kids[1], x, t);
      case Kind::Div: return eval(n.kids[0], x, t) / eval(n.kids[1], x, t);
      case Kind::Pow:
        return detail::cpow(eval(n.kids[0], x, t), eval(n.kids[1], x, t));
      case Kind::Neg: return -eval(n.kids[0], x, t);
      case Kind::Call: {
        std::vector<Complex> args;
        args.reserve(n.kids.size());
        for (const Node& kid : n.kids) args.push_back(eval(kid, x, t));
        return detail::apply_function(n.func, args);
      }
    }
    throw NumericalError("corrupt expression tree");
  }

  static bool depends(const Node& n, Kind what) {
    if (n.kind == what) return true;
    for (const Node& kid : n.kids) {
      if (depends(kid, what)) return true;
    }
    return false;
  }

  Node root_;
  bool has_root_ = false;
  std::string src_;
};

}  // namespace dmodes
