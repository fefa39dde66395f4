#include "fbflow/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <vector>

#include "fbflow/domain.hpp"

namespace fbflow {

struct Expression::Node {
  enum class Op { Num, X, Y, Add, Sub, Mul, Div, Pow, Neg, Fn } op = Op::Num;
  double value = 0.0;
  double (*fn)(double) = nullptr;
  std::shared_ptr<const Node> a, b;

  double eval(double x, double y) const {
    switch (op) {
      case Op::Num: return value;
      case Op::X: return x;
      case Op::Y: return y;
      case Op::Add: return a->eval(x, y) + b->eval(x, y);
      case Op::Sub: return a->eval(x, y) - b->eval(x, y);
      case Op::Mul: return a->eval(x, y) * b->eval(x, y);
      case Op::Div: return a->eval(x, y) / b->eval(x, y);
      case Op::Pow: return power(a->eval(x, y), *b, x, y);
      case Op::Neg: return -a->eval(x, y);
      case Op::Fn: return fn(a->eval(x, y));
    }
    return 0.0;
  }

  // small integer exponents by repeated multiplication so y^3 is exact
  static double power(double base, const Node& e, double x, double y) {
    const double p = e.eval(x, y);
    if (e.op == Op::Num && p == std::floor(p) && std::abs(p) <= 16) {
      double r = 1.0;
      for (int i = 0; i < int(std::abs(p)); ++i) r *= base;
      return p < 0 ? 1.0 / r : r;
    }
    return std::pow(base, p);
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Op = Expression::Node::Op;

double fn_abs(double v) { return std::abs(v); }
double fn_sin(double v) { return std::sin(v); }
double fn_cos(double v) { return std::cos(v); }
double fn_exp(double v) { return std::exp(v); }
double fn_sqrt(double v) { return std::sqrt(v); }
double fn_log(double v) { return std::log(v); }
double fn_tanh(double v) { return std::tanh(v); }

class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  NodePtr parse() {
    NodePtr n = expr();
    skip();
    if (pos_ != s_.size()) error("unexpected character '" + std::string(1, s_[pos_]) + "'");
    return n;
  }

 private:
  [[noreturn]] void error(const std::string& what) const {
    fail_config("expression parse error at position " + std::to_string(pos_) + ": " + what + " in \"" + s_ + "\"");
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  static NodePtr make(Op op, NodePtr a = nullptr, NodePtr b = nullptr) {
    auto n = std::make_shared<Expression::Node>();
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
  }

  static NodePtr number(double v) {
    auto n = std::make_shared<Expression::Node>();
    n->value = v;
    return n;
  }

  NodePtr expr() {
    NodePtr n = term();
    for (;;) {
      if (accept('+')) n = make(Op::Add, n, term());
      else if (accept('-')) n = make(Op::Sub, n, term());
      else return n;
    }
  }

  NodePtr term() {
    NodePtr n = unary();
    for (;;) {
      if (accept('*')) n = make(Op::Mul, n, unary());
      else if (accept('/')) n = make(Op::Div, n, unary());
      else return n;
    }
  }

  NodePtr unary() {
    if (accept('-')) return make(Op::Neg, unary());
    if (accept('+')) return unary();
    NodePtr base = atom();
    if (accept('^')) return make(Op::Pow, base, unary());
    return base;
  }

  NodePtr atom() {
    skip();
    if (pos_ >= s_.size()) error("expected operand");
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) error("malformed number");
      pos_ += std::size_t(end - begin);
      return number(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      const std::string id = s_.substr(start, pos_ - start);
      if (id == "x") return make(Op::X);
      if (id == "y") return make(Op::Y);
      if (id == "pi") return number(3.14159265358979323846);
      if (id == "e") return number(2.71828182845904523536);
      static const std::vector<std::pair<std::string, double (*)(double)>> fns = {
          {"sin", fn_sin}, {"cos", fn_cos},   {"exp", fn_exp},  {"sqrt", fn_sqrt},
          {"abs", fn_abs}, {"log", fn_log}, {"tanh", fn_tanh}};
      for (const auto& [name, f] : fns) {
        if (name != id) continue;
        if (!accept('(')) error("expected '(' after " + id);
        NodePtr arg = expr();
        if (!accept(')')) error("expected ')'");
        auto n = std::make_shared<Expression::Node>();
        n->op = Op::Fn;
        n->fn = f;
        n->a = arg;
        return n;
      }
      pos_ = start;
      error("unknown identifier '" + id + "'");
    }
    if (accept('(')) {
      NodePtr n = expr();
      if (!accept(')')) error("expected ')'");
      return n;
    }
    error("expected operand");
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression::Expression(const std::string& text) : text_(text), root_(Parser(text_).parse()) {}
Expression::~Expression() = default;
Expression::Expression(const Expression&) = default;
Expression& Expression::operator=(const Expression&) = default;

double Expression::operator()(double x, double y) const { return root_->eval(x, y); }

double expression_eval(const std::string& text, double x, double y) { return Expression(text)(x, y); }

}  // namespace fbflow
