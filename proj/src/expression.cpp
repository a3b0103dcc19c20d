#include "swopt/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <vector>

namespace swopt {

struct Expression::Node {
  enum Kind { Num, X, Y, Neg, Add, Sub, Mul, Div, Pow, Call } kind = Num;
  double value = 0;
  double (*fn)(double) = nullptr;
  std::shared_ptr<const Node> a, b;

  double eval(double x, double y) const {
    switch (kind) {
      case Num: return value;
      case X: return x;
      case Y: return y;
      case Neg: return -a->eval(x, y);
      case Add: return a->eval(x, y) + b->eval(x, y);
      case Sub: return a->eval(x, y) - b->eval(x, y);
      case Mul: return a->eval(x, y) * b->eval(x, y);
      case Div: return a->eval(x, y) / b->eval(x, y);
      case Pow: return std::pow(a->eval(x, y), b->eval(x, y));
      case Call: return fn(a->eval(x, y));
    }
    return 0;
  }
};

namespace {

using NodeP = std::shared_ptr<const Expression::Node>;

double step_fn(double s) { return s >= 0 ? 1.0 : 0.0; }
double exp_fn(double s) { return std::exp(s); }
double sin_fn(double s) { return std::sin(s); }
double cos_fn(double s) { return std::cos(s); }
double sqrt_fn(double s) { return std::sqrt(s); }
double abs_fn(double s) { return std::abs(s); }

struct Function {
  const char* name;
  double (*fn)(double);
};
const Function kFunctions[] = {{"exp", exp_fn}, {"sin", sin_fn}, {"cos", cos_fn},
                               {"sqrt", sqrt_fn}, {"abs", abs_fn}, {"step", step_fn}};

NodeP make(Expression::Node::Kind k, NodeP a = nullptr, NodeP b = nullptr) {
  auto n = std::make_shared<Expression::Node>();
  n->kind = k;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

// expr := term (('+'|'-') term)* ; term := unary (('*'|'/') unary)* ;
// unary := '-' unary | '+' unary | power ; power := primary ('^' unary)?
class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  NodeP parse() {
    NodeP n = expr();
    skip();
    if (i_ != s_.size()) fail("unexpected '" + std::string(1, s_[i_]) + "'");
    return n;
  }

 private:
  const std::string& s_;
  std::size_t i_ = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("expression error: " + what + " at position " + std::to_string(i_) + " in \"" + s_ + "\"");
  }
  void skip() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
  }
  bool eat(char c) {
    skip();
    if (i_ < s_.size() && s_[i_] == c) {
      ++i_;
      return true;
    }
    return false;
  }

  NodeP expr() {
    NodeP n = term();
    while (true) {
      if (eat('+')) n = make(Expression::Node::Add, n, term());
      else if (eat('-')) n = make(Expression::Node::Sub, n, term());
      else return n;
    }
  }
  NodeP term() {
    NodeP n = unary();
    while (true) {
      if (eat('*')) n = make(Expression::Node::Mul, n, unary());
      else if (eat('/')) n = make(Expression::Node::Div, n, unary());
      else return n;
    }
  }
  NodeP unary() {
    if (eat('-')) return make(Expression::Node::Neg, unary());
    if (eat('+')) return unary();
    return power();
  }
  NodeP power() {
    NodeP n = primary();
    if (eat('^')) n = make(Expression::Node::Pow, n, unary());  // right associative
    return n;
  }
  NodeP primary() {
    skip();
    if (i_ >= s_.size()) fail("unexpected end");
    if (eat('(')) {
      NodeP n = expr();
      if (!eat(')')) fail("missing ')'");
      return n;
    }
    const char c = s_[i_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s_.c_str() + i_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail("bad number");
      i_ += static_cast<std::size_t>(end - begin);
      auto n = std::make_shared<Expression::Node>();
      n->value = v;
      return n;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = i_;
      while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_')) ++i_;
      const std::string id = s_.substr(start, i_ - start);
      if (id == "x") return make(Expression::Node::X);
      if (id == "y") return make(Expression::Node::Y);
      for (const Function& f : kFunctions) {
        if (id != f.name) continue;
        if (!eat('(')) fail("expected '(' after " + id);
        auto n = std::make_shared<Expression::Node>();
        n->kind = Expression::Node::Call;
        n->fn = f.fn;
        n->a = expr();
        if (!eat(')')) fail("missing ')'");
        return n;
      }
      i_ = start;
      fail("unknown identifier '" + id + "'");
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }
};

}  // namespace

Expression::Expression() : text_("0"), root_(std::make_shared<Node>()) {}

Expression::Expression(const std::string& text) : text_(text), root_(Parser(text_).parse()) {}

double Expression::operator()(double x, double y) const { return root_->eval(x, y); }

}  // namespace swopt
