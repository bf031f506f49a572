#include "pmflow/expr.hpp"

#include <cctype>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace pmflow {

struct Expression::Node {
  enum class Kind { Number, VarP, VarN, Add, Sub, Mul, Div, Neg, Min, Max, Exp };
  Kind kind;
  double value = 0.0;
  std::shared_ptr<const Node> a, b;
};

namespace {

using Node = Expression::Node;
using NodePtr = std::shared_ptr<const Node>;

NodePtr make(Node::Kind k, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<Node>();
  n->kind = k;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  NodePtr parse() {
    NodePtr e = sum();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& msg) {
    throw std::invalid_argument("expression error at position " +
                                std::to_string(pos_) + ": " + msg);
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool consume(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr sum() {
    NodePtr e = term();
    for (;;) {
      if (consume('+')) {
        e = make(Node::Kind::Add, e, term());
      } else if (consume('-')) {
        e = make(Node::Kind::Sub, e, term());
      } else {
        return e;
      }
    }
  }

  NodePtr term() {
    NodePtr e = unary();
    for (;;) {
      if (consume('*')) {
        e = make(Node::Kind::Mul, e, unary());
      } else if (consume('/')) {
        e = make(Node::Kind::Div, e, unary());
      } else {
        return e;
      }
    }
  }

  NodePtr unary() {
    if (consume('-')) return make(Node::Kind::Neg, unary());
    return atom();
  }

  NodePtr atom() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of expression");
    char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = sum();
      if (!consume(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t end = 0;
      double v = std::stod(s_.substr(pos_), &end);
      pos_ += end;
      auto n = std::make_shared<Node>();
      n->kind = Node::Kind::Number;
      n->value = v;
      return n;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) {
        ++pos_;
      }
      std::string ident = s_.substr(start, pos_ - start);
      if (ident == "p") return make(Node::Kind::VarP);
      if (ident == "n") return make(Node::Kind::VarN);
      if (ident == "min" || ident == "max") {
        if (!consume('(')) fail("expected '(' after " + ident);
        NodePtr a = sum();
        if (!consume(',')) fail("expected ',' in " + ident);
        NodePtr b = sum();
        if (!consume(')')) fail("expected ')' after " + ident);
        return make(ident == "min" ? Node::Kind::Min : Node::Kind::Max, a, b);
      }
      if (ident == "exp") {
        if (!consume('(')) fail("expected '(' after exp");
        NodePtr a = sum();
        if (!consume(')')) fail("expected ')' after exp");
        return make(Node::Kind::Exp, a);
      }
      fail("unknown identifier '" + ident + "' (variables are p, n)");
    }
    fail(std::string("unexpected character '") + c + "'");
  }
};

double eval_node(const Node& n, double p, double nn) {
  switch (n.kind) {
    case Node::Kind::Number: return n.value;
    case Node::Kind::VarP: return p;
    case Node::Kind::VarN: return nn;
    case Node::Kind::Add: return eval_node(*n.a, p, nn) + eval_node(*n.b, p, nn);
    case Node::Kind::Sub: return eval_node(*n.a, p, nn) - eval_node(*n.b, p, nn);
    case Node::Kind::Mul: return eval_node(*n.a, p, nn) * eval_node(*n.b, p, nn);
    case Node::Kind::Div: return eval_node(*n.a, p, nn) / eval_node(*n.b, p, nn);
    case Node::Kind::Neg: return -eval_node(*n.a, p, nn);
    case Node::Kind::Min: return std::min(eval_node(*n.a, p, nn), eval_node(*n.b, p, nn));
    case Node::Kind::Max: return std::max(eval_node(*n.a, p, nn), eval_node(*n.b, p, nn));
    case Node::Kind::Exp: return std::exp(eval_node(*n.a, p, nn));
  }
  return 0.0;
}

}  // namespace

Expression Expression::parse(const std::string& text) {
  Parser p(text);
  Expression e;
  e.root_ = p.parse();
  e.text_ = text;
  return e;
}

double Expression::eval(double p, double n) const { return eval_node(*root_, p, n); }

}  // namespace pmflow
