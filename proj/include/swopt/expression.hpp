#pragma once

#include "swopt/types.hpp"

#include <memory>
#include <string>

namespace swopt {

// Arithmetic expression in x and y: + - * / ^, unary minus, parentheses,
// exp sin cos sqrt abs, and step(s) = 1 for s >= 0 else 0.
class Expression {
 public:
  Expression();  // the constant 0
  explicit Expression(const std::string& text);

  double operator()(double x, double y = 0.0) const;
  double operator()(const Vec2& p) const { return (*this)(p.x(), p.y()); }
  const std::string& text() const { return text_; }

  struct Node;

 private:
  std::string text_;
  std::shared_ptr<const Node> root_;
};

}  // namespace swopt
