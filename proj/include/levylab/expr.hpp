#pragma once

// A tiny arithmetic language for coefficient fields and potentials.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          right-associative
//   primary := number | variable | constant | func '(' args ')' | '(' expr ')'
//
// Variables are x1..xd, with x as an alias for x1. Constants: pi, e.
// Functions: exp, log, sqrt, abs, sin, cos (one argument), min, max (two).

#include <cctype>
#include <charconv>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "levylab/errors.hpp"
#include "levylab/state.hpp"

namespace levylab {

class Expression {
 public:
  /// Parses `text` over coordinates x1..x{dim}.
  static Expression parse(const std::string& text, std::size_t dim) {
    Parser parser{text, dim, 0};
    auto root = parser.expr();
    parser.skip_space();
    if (parser.pos != text.size()) parser.fail("unexpected '" + std::string(1, text[parser.pos]) + "'");
    return Expression(std::shared_ptr<const Node>(std::move(root)), dim, text);
  }

  double operator()(const Point& x) const {
    if (static_cast<std::size_t>(x.size()) != dim_) throw ValidationError("expression: point dimension mismatch");
    return root_->eval(x);
  }
  double operator()(double x) const { return (*this)(point1(x)); }

  std::size_t dim() const { return dim_; }
  const std::string& text() const { return text_; }

 private:
  struct Node {
    enum class Kind { Number, Variable, Neg, Add, Sub, Mul, Div, Pow, Call };
    Kind kind = Kind::Number;
    double number = 0.0;
    std::size_t index = 0;
    std::string name;
    std::vector<std::unique_ptr<Node>> args;

    double eval(const Point& x) const {
      switch (kind) {
        case Kind::Number: return number;
        case Kind::Variable: return x[static_cast<Eigen::Index>(index)];
        case Kind::Neg: return -args[0]->eval(x);
        case Kind::Add: return args[0]->eval(x) + args[1]->eval(x);
        case Kind::Sub: return args[0]->eval(x) - args[1]->eval(x);
        case Kind::Mul: return args[0]->eval(x) * args[1]->eval(x);
        case Kind::Div: return args[0]->eval(x) / args[1]->eval(x);
        case Kind::Pow: return std::pow(args[0]->eval(x), args[1]->eval(x));
        case Kind::Call: break;
      }
      const double a = args[0]->eval(x);
      if (name == "exp") return std::exp(a);
      if (name == "log") return std::log(a);
      if (name == "sqrt") return std::sqrt(a);
      if (name == "abs") return std::abs(a);
      if (name == "sin") return std::sin(a);
      if (name == "cos") return std::cos(a);
      const double b = args[1]->eval(x);
      return name == "min" ? std::min(a, b) : std::max(a, b);
    }
  };

  using NodePtr = std::unique_ptr<Node>;

  struct Parser {
    const std::string& text;
    std::size_t dim;
    std::size_t pos;

    [[noreturn]] void fail(const std::string& what) const {
      throw ValidationError("expression '" + text + "' at column " + std::to_string(pos + 1) + ": " + what);
    }
    void skip_space() {
      while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }
    bool accept(char c) {
      skip_space();
      if (pos < text.size() && text[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }
    void expect(char c) {
      if (!accept(c)) fail(std::string("expected '") + c + "'");
    }
    static NodePtr make(Node::Kind kind, NodePtr a, NodePtr b = nullptr) {
      auto n = std::make_unique<Node>();
      n->kind = kind;
      n->args.push_back(std::move(a));
      if (b) n->args.push_back(std::move(b));
      return n;
    }

    NodePtr expr() {
      NodePtr left = term();
      for (;;) {
        if (accept('+')) {
          left = make(Node::Kind::Add, std::move(left), term());
        } else if (accept('-')) {
          left = make(Node::Kind::Sub, std::move(left), term());
        } else {
          return left;
        }
      }
    }
    NodePtr term() {
      NodePtr left = unary();
      for (;;) {
        if (accept('*')) {
          left = make(Node::Kind::Mul, std::move(left), unary());
        } else if (accept('/')) {
          left = make(Node::Kind::Div, std::move(left), unary());
        } else {
          return left;
        }
      }
    }
    NodePtr unary() {
      if (accept('-')) return make(Node::Kind::Neg, unary());
      if (accept('+')) return unary();
      return power();
    }
    NodePtr power() {
      NodePtr base = primary();
      if (accept('^')) return make(Node::Kind::Pow, std::move(base), unary());
      return base;
    }
    NodePtr primary() {
      skip_space();
      if (pos >= text.size()) fail("unexpected end of input");
      const char c = text[pos];
      if (accept('(')) {
        NodePtr inner = expr();
        expect(')');
        return inner;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
      if (std::isalpha(static_cast<unsigned char>(c))) return word();
      fail(std::string("unexpected '") + c + "'");
    }
    NodePtr number() {
      double value = 0.0;
      const char* first = text.data() + pos;
      const auto [ptr, ec] = std::from_chars(first, text.data() + text.size(), value);
      if (ec != std::errc()) fail("malformed number");
      pos += static_cast<std::size_t>(ptr - first);
      auto n = std::make_unique<Node>();
      n->number = value;
      return n;
    }
    NodePtr word() {
      const std::size_t start = pos;
      while (pos < text.size() && std::isalnum(static_cast<unsigned char>(text[pos]))) ++pos;
      const std::string name = text.substr(start, pos - start);
      auto n = std::make_unique<Node>();
      if (name == "pi" || name == "e") {
        n->number = name == "pi" ? std::numbers::pi : std::numbers::e;
        return n;
      }
      if (name == "x" || (name.size() > 1 && name[0] == 'x' &&
                          name.find_first_not_of("0123456789", 1) == std::string::npos)) {
        const std::size_t index = name == "x" ? 1 : std::stoul(name.substr(1));
        if (index < 1 || index > dim) fail("variable " + name + " is out of range for dimension " + std::to_string(dim));
        n->kind = Node::Kind::Variable;
        n->index = index - 1;
        return n;
      }
      std::size_t arity = 0;
      if (name == "exp" || name == "log" || name == "sqrt" || name == "abs" || name == "sin" || name == "cos") arity = 1;
      if (name == "min" || name == "max") arity = 2;
      if (arity == 0) fail("unknown name '" + name + "'");
      n->kind = Node::Kind::Call;
      n->name = name;
      expect('(');
      n->args.push_back(expr());
      for (std::size_t k = 1; k < arity; ++k) {
        expect(',');
        n->args.push_back(expr());
      }
      expect(')');
      return n;
    }
  };

  Expression(std::shared_ptr<const Node> root, std::size_t dim, std::string text)
      : root_(std::move(root)), dim_(dim), text_(std::move(text)) {}

  std::shared_ptr<const Node> root_;
  std::size_t dim_;
  std::string text_;
};

}  // namespace levylab
