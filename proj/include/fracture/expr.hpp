#pragma once

#include <memory>
#include <string>

#include "fracture/geometry.hpp"

namespace fracture {

// Scalar formula in (t, x, y). Grammar: numbers, t, x, y, pi, + - * / ^,
// unary minus, parentheses, sin cos exp sqrt log abs.
class Expr {
 public:
  struct Node;

  Expr();  // constant zero
  static Expr parse(const std::string& text);
  static Expr constant(double value);

  double eval(double t, double x, double y) const;
  double eval(double t, const Vec2& p) const { return eval(t, p.x, p.y); }

  // Symbolic derivative with respect to t.
  Expr dt() const;

  bool is_constant() const;
  bool is_zero() const;
  std::string str() const;

 private:
  explicit Expr(std::shared_ptr<const Node> root) : root_(std::move(root)) {}
  std::shared_ptr<const Node> root_;
};

struct VectorFormula {
  Expr x;
  Expr y;

  static VectorFormula parse(const std::string& a, const std::string& b) {
    return {Expr::parse(a), Expr::parse(b)};
  }
  Vec2 eval(double t, const Vec2& p) const { return {x.eval(t, p), y.eval(t, p)}; }
  VectorFormula dt() const { return {x.dt(), y.dt()}; }
  bool is_zero() const { return x.is_zero() && y.is_zero(); }
};

}  // namespace fracture
