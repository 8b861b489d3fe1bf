#include "finslab/expression.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <optional>

namespace finslab {

ParseError::ParseError(const std::string& message, std::size_t position)
    : std::runtime_error(message + " at offset " + std::to_string(position)), position_(position) {}

enum class Op { number, variable, negate, add, sub, mul, div, pow, sqrt, sin, cos, exp, log };

struct Expression::Node {
  Op op = Op::number;
  double value = 0.0;
  std::size_t var = 0;
  std::optional<long long> integer_exponent;
  std::shared_ptr<const Node> a, b;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;

NodePtr make(Op op, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<Expression::Node>();
  n->op = op;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

std::optional<double> constant_value(const NodePtr& n) {
  switch (n->op) {
    case Op::number: return n->value;
    case Op::variable: return std::nullopt;
    case Op::negate: {
      auto v = constant_value(n->a);
      return v ? std::optional(-*v) : std::nullopt;
    }
    case Op::add:
    case Op::sub:
    case Op::mul:
    case Op::div: {
      auto x = constant_value(n->a), y = constant_value(n->b);
      if (!x || !y) return std::nullopt;
      if (n->op == Op::add) return *x + *y;
      if (n->op == Op::sub) return *x - *y;
      if (n->op == Op::mul) return *x * *y;
      return *x / *y;
    }
    default: return std::nullopt;
  }
}

class Parser {
 public:
  Parser(const std::string& text, const std::vector<std::string>& vars) : s_(text), vars_(vars) {}

  NodePtr parse() {
    auto n = expr();
    skip();
    if (pos_ != s_.size()) throw ParseError(std::string("unexpected '") + s_[pos_] + "'", pos_);
    return n;
  }

 private:
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
  void expect(char c) {
    if (!accept(c)) throw ParseError(std::string("expected '") + c + "'", pos_);
  }

  NodePtr expr() {
    auto n = term();
    for (;;) {
      if (accept('+')) n = make(Op::add, n, term());
      else if (accept('-')) n = make(Op::sub, n, term());
      else return n;
    }
  }
  NodePtr term() {
    auto n = unary();
    for (;;) {
      if (accept('*')) n = make(Op::mul, n, unary());
      else if (accept('/')) n = make(Op::div, n, unary());
      else return n;
    }
  }
  NodePtr unary() {
    if (accept('-')) return make(Op::negate, unary());
    if (accept('+')) return unary();
    return power();
  }
  NodePtr power() {
    auto base = primary();
    if (!accept('^')) return base;
    auto exponent = unary();
    auto n = std::make_shared<Expression::Node>();
    n->op = Op::pow;
    n->a = base;
    n->b = exponent;
    if (auto v = constant_value(exponent); v && std::isfinite(*v) && *v == std::nearbyint(*v) && std::abs(*v) < 1e6)
      n->integer_exponent = static_cast<long long>(*v);
    return n;
  }
  NodePtr primary() {
    skip();
    if (pos_ >= s_.size()) throw ParseError("unexpected end of expression", pos_);
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      auto n = expr();
      expect(')');
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      const std::string name = s_.substr(start, pos_ - start);
      static const std::pair<const char*, Op> functions[] = {
          {"sqrt", Op::sqrt}, {"sin", Op::sin}, {"cos", Op::cos}, {"exp", Op::exp}, {"log", Op::log}};
      for (const auto& [fname, op] : functions) {
        if (name == fname) {
          expect('(');
          auto arg = expr();
          expect(')');
          return make(op, arg);
        }
      }
      for (std::size_t i = 0; i < vars_.size(); ++i) {
        if (vars_[i] == name) {
          auto n = std::make_shared<Expression::Node>();
          n->op = Op::variable;
          n->var = i;
          return n;
        }
      }
      if (name == "pi") {
        auto n = std::make_shared<Expression::Node>();
        n->value = std::numbers::pi;
        return n;
      }
      throw ParseError("unknown identifier '" + name + "'", start);
    }
    throw ParseError(std::string("unexpected '") + c + "'", pos_);
  }
  NodePtr number() {
    const char* begin = s_.c_str() + pos_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) throw ParseError("malformed number", pos_);
    pos_ += static_cast<std::size_t>(end - begin);
    auto n = std::make_shared<Expression::Node>();
    n->value = v;
    return n;
  }

  const std::string& s_;
  const std::vector<std::string>& vars_;
  std::size_t pos_ = 0;
};

double ipow(double x, long long p) {
  if (p < 0) return 1.0 / ipow(x, -p);
  double r = 1.0;
  while (p) {
    if (p & 1) r *= x;
    x *= x;
    p >>= 1;
  }
  return r;
}

double eval(const Expression::Node& n, std::span<const double> v) {
  switch (n.op) {
    case Op::number: return n.value;
    case Op::variable: return v[n.var];
    case Op::negate: return -eval(*n.a, v);
    case Op::add: return eval(*n.a, v) + eval(*n.b, v);
    case Op::sub: return eval(*n.a, v) - eval(*n.b, v);
    case Op::mul: return eval(*n.a, v) * eval(*n.b, v);
    case Op::div: return eval(*n.a, v) / eval(*n.b, v);
    case Op::pow: {
      const double base = eval(*n.a, v);
      if (n.integer_exponent) return ipow(base, *n.integer_exponent);
      if (base < 0.0) throw DomainError("non-integer power of a negative value");
      return std::pow(base, eval(*n.b, v));
    }
    case Op::sqrt: {
      const double a = eval(*n.a, v);
      if (a < 0.0) throw DomainError("sqrt of a negative value");
      return std::sqrt(a);
    }
    case Op::sin: return std::sin(eval(*n.a, v));
    case Op::cos: return std::cos(eval(*n.a, v));
    case Op::exp: return std::exp(eval(*n.a, v));
    case Op::log: {
      const double a = eval(*n.a, v);
      if (!(a > 0.0)) throw DomainError("log of a non-positive value");
      return std::log(a);
    }
  }
  return 0.0;
}

Jet eval(const Expression::Node& n, std::span<const Jet> v, int nv, int order) {
  switch (n.op) {
    case Op::number: return Jet::constant(n.value, nv, order);
    case Op::variable: return v[n.var];
    case Op::negate: return -eval(*n.a, v, nv, order);
    case Op::add: return eval(*n.a, v, nv, order) + eval(*n.b, v, nv, order);
    case Op::sub: return eval(*n.a, v, nv, order) - eval(*n.b, v, nv, order);
    case Op::mul: return eval(*n.a, v, nv, order) * eval(*n.b, v, nv, order);
    case Op::div: return eval(*n.a, v, nv, order) / eval(*n.b, v, nv, order);
    case Op::pow: {
      const Jet base = eval(*n.a, v, nv, order);
      if (n.integer_exponent) return pow(base, static_cast<double>(*n.integer_exponent));
      return pow(base, eval(*n.b, v, nv, order));
    }
    case Op::sqrt: return sqrt(eval(*n.a, v, nv, order));
    case Op::sin: return sin(eval(*n.a, v, nv, order));
    case Op::cos: return cos(eval(*n.a, v, nv, order));
    case Op::exp: return exp(eval(*n.a, v, nv, order));
    case Op::log: return log(eval(*n.a, v, nv, order));
  }
  return Jet::constant(0.0, nv, order);
}

}  // namespace

Expression Expression::parse(const std::string& text, const std::vector<std::string>& variables) {
  Expression e;
  e.root_ = Parser(text, variables).parse();
  e.text_ = text;
  e.num_vars_ = variables.size();
  return e;
}

Jet Expression::operator()(std::span<const Jet> vars) const {
  if (vars.size() != num_vars_) throw std::invalid_argument("expression: wrong number of variables");
  const int nv = vars.empty() ? 0 : vars[0].num_vars();
  const int order = vars.empty() ? 0 : vars[0].order();
  return eval(*root_, vars, nv, order);
}

double Expression::operator()(std::span<const double> vars) const {
  if (vars.size() != num_vars_) throw std::invalid_argument("expression: wrong number of variables");
  return eval(*root_, vars);
}

SmoothMap expression_map(const std::vector<std::string>& components, const std::vector<std::string>& variables,
                         Box domain, std::string name) {
  std::vector<Expression> exprs;
  for (const auto& c : components) exprs.push_back(Expression::parse(c, variables));
  if (name.empty()) {
    for (std::size_t i = 0; i < components.size(); ++i) name += (i ? ", " : "") + components[i];
    name = "(" + name + ")";
  }
  const int dom = static_cast<int>(variables.size());
  const int cod = static_cast<int>(components.size());
  return SmoothMap(
      dom, cod, std::move(domain),
      [exprs = std::move(exprs)](std::span<const Jet> z) {
        std::vector<Jet> out;
        out.reserve(exprs.size());
        for (const auto& e : exprs) out.push_back(e(z));
        return out;
      },
      std::move(name));
}

std::vector<std::string> base_variable_names(int n) {
  std::vector<std::string> out;
  for (int i = 1; i <= n; ++i) out.push_back("x" + std::to_string(i));
  return out;
}

std::vector<std::string> bundle_variable_names(int n) {
  auto out = base_variable_names(n);
  for (int i = 1; i <= n; ++i) out.push_back("y" + std::to_string(i));
  return out;
}

}  // namespace finslab
