#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace finslab {

/// Raised when a value leaves the set on which an operation is smooth
/// (sqrt/log of a non-positive value, evaluation outside a chart box, ...).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a derived quantity needs more derivative orders than the
/// engine is allowed to carry.
class JetOrderError : public std::runtime_error {
 public:
  JetOrderError(int required, int limit);
  int required() const { return required_; }
  int limit() const { return limit_; }

 private:
  int required_;
  int limit_;
};

namespace jets {

/// Highest total derivative order any jet may carry.
inline constexpr int kMaxOrder = 14;
/// Order used when callers do not ask for anything specific.
inline constexpr int kDefaultOrder = 4;

/// Monomial bookkeeping shared by all jets of the same (num_vars, order).
/// Monomials are enumerated degree by degree, so the layout of a lower order
/// is always a prefix of the layout of a higher one.
struct Layout {
  int num_vars = 0;
  int order = 0;
  std::vector<std::vector<int>> exponents;   // per monomial
  std::vector<int> degree;                   // per monomial
  std::vector<int> degree_offset;            // first monomial of each degree, size order+2
  std::vector<double> factorial_weight;      // alpha! per monomial
  // product table: coefficient a[i]*b[j] contributes to out[k]; sorted by deg(k)
  std::vector<int> mul_i, mul_j, mul_k;
  std::vector<std::size_t> mul_end_for_degree;  // prefix end of the table for output degree <= d
  // derivative table per variable: source monomial -> (target monomial, exponent)
  std::vector<std::vector<int>> diff_target;
  // parent[m] = (monomial with one fewer power of variable last_var[m])
  std::vector<int> parent, last_var;

  std::unordered_map<long long, int> lookup;

  std::size_t size() const { return exponents.size(); }
  int index_of(std::span<const int> alpha) const;
  long long key(std::span<const int> alpha) const;

  static std::shared_ptr<const Layout> get(int num_vars, int order);
};

}  // namespace jets

/// Truncated multivariate Taylor polynomial: the value and every mixed partial
/// derivative up to total degree `order` of a smooth function of `num_vars`
/// variables at a fixed point. Storage is the normalized Taylor coefficient
/// (derivative / alpha!).
class Jet {
 public:
  Jet() : Jet(0, 0) {}
  Jet(int num_vars, int order);

  static Jet constant(double value, int num_vars, int order);
  /// The independent variable `var` around the point `value`.
  static Jet variable(double value, int var, int num_vars, int order);

  int num_vars() const { return layout_->num_vars; }
  int order() const { return layout_->order; }
  double value() const { return c_[0]; }
  std::size_t size() const { return c_.size(); }

  std::span<const double> taylor() const { return c_; }
  std::span<double> taylor_mut() { return c_; }
  double taylor(std::span<const int> alpha) const;
  /// Mixed partial derivative d^|alpha| / dz^alpha at the expansion point.
  double derivative(std::span<const int> alpha) const;
  double derivative(std::initializer_list<int> alpha) const;
  /// Univariate shorthand: k-th derivative with respect to variable `var`.
  double derivative_along(int var, int k) const;
  /// All derivatives in graded monomial order (value, first order, ...).
  std::vector<double> derivatives() const;

  /// Exact partial derivative of the truncated polynomial; the order drops by one.
  Jet partial(int var) const;
  Jet truncated(int order) const;
  /// The same jet with the constant term removed.
  Jet nilpotent_part() const;
  bool is_constant() const;

  const jets::Layout& layout() const { return *layout_; }

  Jet& operator+=(const Jet& o);
  Jet& operator-=(const Jet& o);
  Jet& operator*=(const Jet& o);
  Jet& operator/=(const Jet& o);
  Jet& operator+=(double v) { c_[0] += v; return *this; }
  Jet& operator-=(double v) { c_[0] -= v; return *this; }
  Jet& operator*=(double v);
  Jet& operator/=(double v);

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator*(const Jet& a, const Jet& b);
  friend Jet operator/(const Jet& a, const Jet& b);
  friend Jet operator+(Jet a, double v) { return a += v; }
  friend Jet operator+(double v, Jet a) { return a += v; }
  friend Jet operator-(Jet a, double v) { return a -= v; }
  friend Jet operator-(double v, const Jet& a);
  friend Jet operator*(Jet a, double v) { return a *= v; }
  friend Jet operator*(double v, Jet a) { return a *= v; }
  friend Jet operator/(Jet a, double v) { return a /= v; }
  friend Jet operator/(double v, const Jet& a);
  friend Jet operator-(const Jet& a);

 private:
  Jet(std::shared_ptr<const jets::Layout> layout);
  std::shared_ptr<const jets::Layout> layout_;
  std::vector<double> c_;

  friend Jet compose_series(const Jet&, std::span<const double>);
};

/// f(a) for a univariate f given by its Taylor coefficients at value(a).
Jet compose_series(const Jet& a, std::span<const double> coefficients);

Jet sqrt(const Jet& a);
Jet exp(const Jet& a);
Jet log(const Jet& a);
Jet sin(const Jet& a);
Jet cos(const Jet& a);
/// a^p for a real exponent. Integer exponents accept negative bases.
Jet pow(const Jet& a, double p);
Jet pow(const Jet& a, const Jet& b);
Jet reciprocal(const Jet& a);

/// Substitute `inner` (one jet per variable of `outer`, all sharing a layout)
/// into the polynomial `outer`, which is an expansion around value(inner).
Jet compose(const Jet& outer, std::span<const Jet> inner);
std::vector<Jet> compose(std::span<const Jet> outer, std::span<const Jet> inner);

/// True when `inner` are exactly the coordinate variables of their own layout,
/// i.e. composing with them is the identity.
bool is_identity_chart(std::span<const Jet> inner);

std::vector<double> values(std::span<const Jet> jets);
std::vector<Jet> variables(std::span<const double> point, int order);
std::vector<Jet> constants(std::span<const double> point, int num_vars, int order);

}  // namespace finslab
