#pragma once

#include <memory>
#include <string>

namespace fbflow {

/// Closed-form expression in x and y.
///   expr  := term (('+'|'-') term)*
///   term  := unary (('*'|'/') unary)*
///   unary := ('+'|'-') unary | power
///   power := atom ('^' unary)?          right associative, binds tighter than unary minus
///   atom  := number | 'x' | 'y' | 'pi' | 'e' | fn '(' expr ')' | '(' expr ')'
///   fn    := sin | cos | exp | sqrt | abs | log | tanh
/// Parse errors throw a config Error naming the zero-based character position.
class Expression {
 public:
  explicit Expression(const std::string& text);
  ~Expression();
  Expression(const Expression&);
  Expression& operator=(const Expression&);

  double operator()(double x, double y) const;
  const std::string& text() const { return text_; }

  struct Node;

 private:
  std::string text_;
  std::shared_ptr<const Node> root_;
};

double expression_eval(const std::string& text, double x, double y);

}  // namespace fbflow
