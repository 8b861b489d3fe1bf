#pragma once

#include <memory>
#include <string>
#include <vector>

#include "finslab/smooth_map.hpp"

namespace finslab {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t position);
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Arithmetic expression over named variables.
///
///   expr    := term (('+' | '-') term)*
///   term    := unary (('*' | '/') unary)*
///   unary   := '-' unary | power
///   power   := primary ('^' unary)?
///   primary := number | 'pi' | name | func '(' expr ')' | '(' expr ')'
///   func    := sqrt | sin | cos | exp | log
///
/// '^' is right-associative. A constant integer exponent is expanded as a
/// product, so it accepts negative bases.
class Expression {
 public:
  struct Node;

  static Expression parse(const std::string& text, const std::vector<std::string>& variables);

  Jet operator()(std::span<const Jet> vars) const;
  double operator()(std::span<const double> vars) const;

  const std::string& text() const { return text_; }
  std::size_t num_vars() const { return num_vars_; }

 private:
  std::shared_ptr<const Node> root_;
  std::string text_;
  std::size_t num_vars_ = 0;
};

/// Vector-valued map whose components are expressions in `variables`.
SmoothMap expression_map(const std::vector<std::string>& components, const std::vector<std::string>& variables,
                         Box domain, std::string name = {});

/// "x1".."xn" followed by "y1".."yn".
std::vector<std::string> bundle_variable_names(int n);
/// "x1".."xn".
std::vector<std::string> base_variable_names(int n);

}  // namespace finslab
