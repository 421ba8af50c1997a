#pragma once

// Closed expression vocabulary for configuration closures:
//   numbers, x, y, r = sqrt(x^2 + y^2), pi, + - * / ^ (right-assoc),
//   abs sin cos sqrt exp log.
// Evaluation carries the gradient along (forward mode), so a(x) and its
// gradient come from the same parse.

#include <cctype>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "dphase/errors.hpp"
#include "dphase/small_linalg.hpp"

namespace dphase {

struct Dual {
  double v = 0.0, dx = 0.0, dy = 0.0;
};

class Expression {
 public:
  static Expression parse(const std::string& text) {
    Parser ps{text, 0};
    auto node = ps.expr();
    ps.skip();
    if (ps.pos != text.size()) ps.fail("unexpected '" + std::string(1, text[ps.pos]) + "'");
    Expression e;
    e.root_ = std::move(node);
    e.text_ = text;
    return e;
  }

  const std::string& text() const { return text_; }
  bool is_constant() const { return root_->constant(); }

  Dual eval_dual(const Point& x) const {
    const Dual d = root_->eval(x);
    if (!std::isfinite(d.v)) {
      throw Error(ErrorCode::ValidationError, "expression '" + text_ + "' is not finite at (" + std::to_string(x.x) +
                                                  ", " + std::to_string(x.y) + ")");
    }
    return d;
  }
  double operator()(const Point& x) const { return eval_dual(x).v; }
  GradVec gradient(const Point& x, int dim) const {
    const Dual d = eval_dual(x);
    if (!std::isfinite(d.dx) || !std::isfinite(d.dy)) {
      throw Error(ErrorCode::ValidationError, "gradient of '" + text_ + "' is not finite");
    }
    return dim == 1 ? GradVec(d.dx) : GradVec(d.dx, d.dy);
  }

 private:
  struct Node {
    enum Kind { Num, X, Y, R, Add, Sub, Mul, Div, Pow, Neg, Abs, Sin, Cos, Sqrt, Exp, Log } kind;
    double value = 0.0;
    std::unique_ptr<Node> a, b;

    bool constant() const {
      if (kind == X || kind == Y || kind == R) return false;
      return (!a || a->constant()) && (!b || b->constant());
    }

    Dual eval(const Point& p) const {
      switch (kind) {
        case Num: return {value, 0, 0};
        case X: return {p.x, 1, 0};
        case Y: return {p.y, 0, 1};
        case R: {
          const double r = std::hypot(p.x, p.y);
          return r > 0 ? Dual{r, p.x / r, p.y / r} : Dual{0, 0, 0};
        }
        default: break;
      }
      const Dual u = a->eval(p);
      switch (kind) {
        case Neg: return {-u.v, -u.dx, -u.dy};
        case Abs: {
          const double s = u.v > 0 ? 1.0 : (u.v < 0 ? -1.0 : 0.0);
          return {std::abs(u.v), s * u.dx, s * u.dy};
        }
        case Sin: return chain(u, std::sin(u.v), std::cos(u.v));
        case Cos: return chain(u, std::cos(u.v), -std::sin(u.v));
        case Sqrt: {
          if (u.v < 0) return {NAN, 0, 0};
          const double s = std::sqrt(u.v);
          return chain(u, s, 0.5 / s);
        }
        case Exp: {
          const double e = std::exp(u.v);
          return chain(u, e, e);
        }
        case Log: return u.v > 0 ? chain(u, std::log(u.v), 1.0 / u.v) : Dual{NAN, 0, 0};
        default: break;
      }
      const Dual w = b->eval(p);
      switch (kind) {
        case Add: return {u.v + w.v, u.dx + w.dx, u.dy + w.dy};
        case Sub: return {u.v - w.v, u.dx - w.dx, u.dy - w.dy};
        case Mul: return {u.v * w.v, u.dx * w.v + u.v * w.dx, u.dy * w.v + u.v * w.dy};
        case Div: {
          const double inv = 1.0 / w.v;
          return {u.v * inv, (u.dx - u.v * inv * w.dx) * inv, (u.dy - u.v * inv * w.dy) * inv};
        }
        case Pow: return power(u, w);
        default: return {NAN, 0, 0};
      }
    }

    static Dual chain(const Dual& u, double f, double df) {
      return {f, u.dx == 0 ? 0 : df * u.dx, u.dy == 0 ? 0 : df * u.dy};
    }

    static Dual power(const Dual& u, const Dual& w) {
      const bool const_exp = w.dx == 0 && w.dy == 0;
      if (const_exp) {
        // domain guard: negative base needs an integer exponent
        if (u.v < 0 && w.v != std::floor(w.v)) return {NAN, 0, 0};
        return chain(u, std::pow(u.v, w.v), w.v * std::pow(u.v, w.v - 1.0));
      }
      if (!(u.v > 0)) return {NAN, 0, 0};
      const double f = std::pow(u.v, w.v), l = std::log(u.v);
      return {f, f * (w.dx * l + (u.dx == 0 ? 0 : w.v * u.dx / u.v)),
              f * (w.dy * l + (u.dy == 0 ? 0 : w.v * u.dy / u.v))};
    }
  };

  struct Parser {
    const std::string& s;
    size_t pos;

    [[noreturn]] void fail(const std::string& why) const {
      throw Error(ErrorCode::ParseError, "expression '" + s + "' at column " + std::to_string(pos + 1) + ": " + why);
    }
    void skip() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool eat(char c) {
      skip();
      if (pos < s.size() && s[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }
    static std::unique_ptr<Node> make(Node::Kind k, std::unique_ptr<Node> a = nullptr, std::unique_ptr<Node> b = nullptr) {
      auto n = std::make_unique<Node>();
      n->kind = k;
      n->a = std::move(a);
      n->b = std::move(b);
      return n;
    }

    std::unique_ptr<Node> expr() {
      auto lhs = term();
      for (;;) {
        if (eat('+')) {
          lhs = make(Node::Add, std::move(lhs), term());
        } else if (eat('-')) {
          lhs = make(Node::Sub, std::move(lhs), term());
        } else {
          return lhs;
        }
      }
    }
    std::unique_ptr<Node> term() {
      auto lhs = unary();
      for (;;) {
        if (eat('*')) {
          lhs = make(Node::Mul, std::move(lhs), unary());
        } else if (eat('/')) {
          lhs = make(Node::Div, std::move(lhs), unary());
        } else {
          return lhs;
        }
      }
    }
    std::unique_ptr<Node> unary() {
      if (eat('-')) return make(Node::Neg, unary());
      if (eat('+')) return unary();
      return power();
    }
    std::unique_ptr<Node> power() {
      auto base = primary();
      if (eat('^')) return make(Node::Pow, std::move(base), unary());
      return base;
    }
    std::unique_ptr<Node> primary() {
      skip();
      if (pos >= s.size()) fail("unexpected end of expression");
      if (eat('(')) {
        auto e = expr();
        if (!eat(')')) fail("expected ')'");
        return e;
      }
      const char c = s[pos];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        const char* begin = s.c_str() + pos;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) fail("bad number");
        pos += static_cast<size_t>(end - begin);
        auto n = make(Node::Num);
        n->value = v;
        return n;
      }
      if (std::isalpha(static_cast<unsigned char>(c))) {
        size_t end = pos;
        while (end < s.size() && std::isalnum(static_cast<unsigned char>(s[end]))) ++end;
        const std::string id = s.substr(pos, end - pos);
        pos = end;
        if (id == "x") return make(Node::X);
        if (id == "y") return make(Node::Y);
        if (id == "r") return make(Node::R);
        if (id == "pi") {
          auto n = make(Node::Num);
          n->value = M_PI;
          return n;
        }
        static const std::pair<const char*, Node::Kind> funcs[] = {{"abs", Node::Abs}, {"sin", Node::Sin},
                                                                   {"cos", Node::Cos}, {"sqrt", Node::Sqrt},
                                                                   {"exp", Node::Exp}, {"log", Node::Log}};
        for (const auto& [name, kind] : funcs) {
          if (id != name) continue;
          if (!eat('(')) fail("expected '(' after " + id);
          auto arg = expr();
          if (!eat(')')) fail("expected ')'");
          return make(kind, std::move(arg));
        }
        pos -= id.size();
        fail("unknown identifier '" + id + "'");
      }
      fail("unexpected '" + std::string(1, c) + "'");
    }
  };

  std::shared_ptr<const Node> root_;
  std::string text_;
};

}  // namespace dphase
