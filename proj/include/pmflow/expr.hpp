#pragma once

#include <memory>
#include <string>

namespace pmflow {

// Tiny expression language over the variables (p, n): numbers, + - * /,
// unary minus, parentheses, and the calls min(a,b), max(a,b), exp(a).
// Used to define growth laws from config files.
class Expression {
 public:
  static Expression parse(const std::string& text);  // throws on syntax error

  double eval(double p, double n) const;
  const std::string& text() const { return text_; }

  struct Node;

 private:
  std::shared_ptr<const Node> root_;
  std::string text_;
};

}  // namespace pmflow
