#include "finslab/jet.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <unordered_map>

namespace finslab {

JetOrderError::JetOrderError(int required, int limit)
    : std::runtime_error("jet order exhausted: derivative of order " + std::to_string(required) +
                         " required, engine limit is " + std::to_string(limit)),
      required_(required),
      limit_(limit) {}

namespace jets {
namespace {

void monomials_of_degree(int num_vars, int degree, std::vector<int>& current, int var,
                         std::vector<std::vector<int>>& out) {
  if (var == num_vars - 1) {
    current[var] = degree;
    out.push_back(current);
    current[var] = 0;
    return;
  }
  for (int e = degree; e >= 0; --e) {
    current[var] = e;
    monomials_of_degree(num_vars, degree - e, current, var + 1, out);
  }
  current[var] = 0;
}

std::shared_ptr<Layout> build(int num_vars, int order) {
  auto l = std::make_shared<Layout>();
  l->num_vars = num_vars;
  l->order = order;
  l->degree_offset.assign(order + 2, 0);
  if (num_vars == 0) {
    l->exponents.push_back({});
    l->degree.push_back(0);
    for (int d = 1; d <= order + 1; ++d) l->degree_offset[d] = 1;
  } else {
    std::vector<int> current(num_vars, 0);
    for (int d = 0; d <= order; ++d) {
      l->degree_offset[d] = static_cast<int>(l->exponents.size());
      std::vector<std::vector<int>> level;
      monomials_of_degree(num_vars, d, current, 0, level);
      for (auto& m : level) {
        l->exponents.push_back(std::move(m));
        l->degree.push_back(d);
      }
    }
    l->degree_offset[order + 1] = static_cast<int>(l->exponents.size());
  }
  const std::size_t n = l->exponents.size();
  for (std::size_t m = 0; m < n; ++m) l->lookup.emplace(l->key(l->exponents[m]), static_cast<int>(m));

  l->factorial_weight.resize(n);
  for (std::size_t m = 0; m < n; ++m) {
    double w = 1.0;
    for (int e : l->exponents[m])
      for (int q = 2; q <= e; ++q) w *= q;
    l->factorial_weight[m] = w;
  }

  // Product table grouped by output degree.
  l->mul_end_for_degree.assign(order + 1, 0);
  for (int d = 0; d <= order; ++d) {
    for (int di = 0; di <= d; ++di) {
      const int dj = d - di;
      for (int i = l->degree_offset[di]; i < l->degree_offset[di + 1]; ++i) {
        for (int j = l->degree_offset[dj]; j < l->degree_offset[dj + 1]; ++j) {
          std::vector<int> sum(num_vars);
          for (int v = 0; v < num_vars; ++v) sum[v] = l->exponents[i][v] + l->exponents[j][v];
          l->mul_i.push_back(i);
          l->mul_j.push_back(j);
          l->mul_k.push_back(l->index_of(sum));
        }
      }
    }
    l->mul_end_for_degree[d] = l->mul_i.size();
  }

  l->diff_target.assign(num_vars, std::vector<int>(n, -1));
  l->parent.assign(n, -1);
  l->last_var.assign(n, -1);
  for (std::size_t m = 0; m < n; ++m) {
    std::vector<int> alpha = l->exponents[m];
    for (int v = 0; v < num_vars; ++v) {
      if (alpha[v] == 0) continue;
      alpha[v] -= 1;
      l->diff_target[v][m] = l->index_of(alpha);
      alpha[v] += 1;
    }
    for (int v = num_vars - 1; v >= 0; --v) {
      if (alpha[v] > 0) {
        l->last_var[m] = v;
        alpha[v] -= 1;
        l->parent[m] = l->index_of(alpha);
        break;
      }
    }
  }
  return l;
}

}  // namespace

long long Layout::key(std::span<const int> alpha) const {
  long long k = 0;
  for (int e : alpha) k = k * (order + 1) + e;
  return k;
}

int Layout::index_of(std::span<const int> alpha) const {
  int d = 0;
  for (int e : alpha) {
    if (e < 0) return -1;
    d += e;
  }
  if (d > order || static_cast<int>(alpha.size()) != num_vars) return -1;
  auto it = lookup.find(key(alpha));
  return it == lookup.end() ? -1 : it->second;
}

std::shared_ptr<const Layout> Layout::get(int num_vars, int order) {
  if (order < 0) throw std::invalid_argument("jet order must be non-negative");
  if (num_vars < 0) throw std::invalid_argument("jet num_vars must be non-negative");
  if (order > kMaxOrder) throw JetOrderError(order, kMaxOrder);
  thread_local std::map<std::pair<int, int>, std::shared_ptr<const Layout>> local;
  if (auto it = local.find({num_vars, order}); it != local.end()) return it->second;
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::shared_ptr<const Layout>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{num_vars, order}];
  if (!slot) slot = build(num_vars, order);
  local[{num_vars, order}] = slot;
  return slot;
}

}  // namespace jets

// ---------------------------------------------------------------------------

Jet::Jet(std::shared_ptr<const jets::Layout> layout)
    : layout_(std::move(layout)), c_(layout_->size(), 0.0) {}

Jet::Jet(int num_vars, int order) : Jet(jets::Layout::get(num_vars, order)) {}

Jet Jet::constant(double value, int num_vars, int order) {
  Jet j(num_vars, order);
  j.c_[0] = value;
  return j;
}

Jet Jet::variable(double value, int var, int num_vars, int order) {
  if (var < 0 || var >= num_vars) throw std::out_of_range("jet variable index out of range");
  Jet j(num_vars, order);
  j.c_[0] = value;
  if (order >= 1) {
    std::vector<int> alpha(num_vars, 0);
    alpha[var] = 1;
    j.c_[j.layout_->index_of(alpha)] = 1.0;
  }
  return j;
}

double Jet::taylor(std::span<const int> alpha) const {
  const int idx = layout_->index_of(alpha);
  if (idx < 0) throw std::out_of_range("multi-index exceeds jet order");
  return c_[idx];
}

double Jet::derivative(std::span<const int> alpha) const {
  const int idx = layout_->index_of(alpha);
  if (idx < 0) throw std::out_of_range("multi-index exceeds jet order");
  return c_[idx] * layout_->factorial_weight[idx];
}

double Jet::derivative(std::initializer_list<int> alpha) const {
  return derivative(std::span<const int>(alpha.begin(), alpha.size()));
}

double Jet::derivative_along(int var, int k) const {
  std::vector<int> alpha(num_vars(), 0);
  alpha.at(var) = k;
  return derivative(alpha);
}

std::vector<double> Jet::derivatives() const {
  std::vector<double> out(c_.size());
  for (std::size_t m = 0; m < c_.size(); ++m) out[m] = c_[m] * layout_->factorial_weight[m];
  return out;
}

Jet Jet::partial(int var) const {
  if (var < 0 || var >= num_vars()) throw std::out_of_range("partial: variable out of range");
  if (order() == 0) throw JetOrderError(1, 0);
  Jet out(num_vars(), order() - 1);
  const auto& target = layout_->diff_target[var];
  for (std::size_t m = 0; m < c_.size(); ++m) {
    const int t = target[m];
    if (t < 0) continue;
    out.c_[t] += c_[m] * layout_->exponents[m][var];
  }
  return out;
}

Jet Jet::truncated(int new_order) const {
  if (new_order >= order()) return *this;
  Jet out(num_vars(), new_order);
  std::copy_n(c_.begin(), out.c_.size(), out.c_.begin());
  return out;
}

Jet Jet::nilpotent_part() const {
  Jet out = *this;
  out.c_[0] = 0.0;
  return out;
}

bool Jet::is_constant() const {
  return std::all_of(c_.begin() + 1, c_.end(), [](double v) { return v == 0.0; });
}

namespace {

void require_same_vars(const Jet& a, const Jet& b) {
  if (a.num_vars() != b.num_vars())
    throw std::invalid_argument("jet arithmetic needs matching num_vars (" + std::to_string(a.num_vars()) +
                                " vs " + std::to_string(b.num_vars()) + ")");
}

}  // namespace

Jet& Jet::operator+=(const Jet& o) {
  require_same_vars(*this, o);
  if (o.order() < order()) *this = truncated(o.order());
  for (std::size_t m = 0; m < c_.size(); ++m) c_[m] += o.c_[m];
  return *this;
}

Jet& Jet::operator-=(const Jet& o) {
  require_same_vars(*this, o);
  if (o.order() < order()) *this = truncated(o.order());
  for (std::size_t m = 0; m < c_.size(); ++m) c_[m] -= o.c_[m];
  return *this;
}

Jet& Jet::operator*=(double v) {
  for (double& x : c_) x *= v;
  return *this;
}

Jet& Jet::operator/=(double v) {
  for (double& x : c_) x /= v;
  return *this;
}

Jet operator*(const Jet& a, const Jet& b) {
  require_same_vars(a, b);
  const Jet& lo = a.order() <= b.order() ? a : b;
  Jet out(lo.layout_);
  const auto& l = *lo.layout_;
  const std::size_t end = l.mul_end_for_degree[l.order];
  const int* mi = l.mul_i.data();
  const int* mj = l.mul_j.data();
  const int* mk = l.mul_k.data();
  const double* ac = a.c_.data();
  const double* bc = b.c_.data();
  double* oc = out.c_.data();
  for (std::size_t t = 0; t < end; ++t) oc[mk[t]] += ac[mi[t]] * bc[mj[t]];
  return out;
}

Jet& Jet::operator*=(const Jet& o) { return *this = *this * o; }
Jet& Jet::operator/=(const Jet& o) { return *this = *this / o; }

Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }

Jet operator-(double v, const Jet& a) {
  Jet out = -a;
  out += v;
  return out;
}

Jet operator/(double v, const Jet& a) { return reciprocal(a) * v; }

Jet operator-(const Jet& a) {
  Jet out = a;
  for (double& x : out.c_) x = -x;
  return out;
}

Jet compose_series(const Jet& a, std::span<const double> coefficients) {
  const int n = a.order();
  Jet delta = a.nilpotent_part();
  Jet result = Jet::constant(coefficients[n], a.num_vars(), n);
  for (int k = n - 1; k >= 0; --k) {
    result = result * delta;
    result.c_[0] += coefficients[k];
  }
  return result;
}

namespace {

bool is_integer(double p) { return std::isfinite(p) && p == std::nearbyint(p); }

Jet integer_power(const Jet& a, long long p) {
  if (p < 0) return reciprocal(integer_power(a, -p));
  Jet result = Jet::constant(1.0, a.num_vars(), a.order());
  Jet base = a;
  while (p > 0) {
    if (p & 1) result = result * base;
    p >>= 1;
    if (p > 0) base = base * base;
  }
  return result;
}

}  // namespace

Jet pow(const Jet& a, double p) {
  const double a0 = a.value();
  const int n = a.order();
  if (a0 == 0.0) {
    if (is_integer(p) && p >= 0) return integer_power(a, static_cast<long long>(p));
    if (n == 0 && p > 0) return Jet::constant(0.0, a.num_vars(), 0);
    throw DomainError("pow: base value 0 with exponent " + std::to_string(p) + " is not smooth");
  }
  if (a0 < 0.0 && !is_integer(p))
    throw DomainError("pow: negative base " + std::to_string(a0) + " with non-integer exponent");
  // binom(p, k) a0^(p-k)
  std::vector<double> c(n + 1);
  c[0] = std::pow(a0, p);
  for (int k = 1; k <= n; ++k) c[k] = c[k - 1] * (p - k + 1) / (k * a0);
  return compose_series(a, c);
}

Jet pow(const Jet& a, const Jet& b) {
  if (b.is_constant()) return pow(a, b.value());
  return exp(b * log(a));
}

Jet reciprocal(const Jet& a) {
  if (a.value() == 0.0) throw DomainError("division by a jet with zero value part");
  return pow(a, -1.0);
}

Jet sqrt(const Jet& a) {
  if (a.value() < 0.0) throw DomainError("sqrt of negative value " + std::to_string(a.value()));
  return pow(a, 0.5);
}

Jet exp(const Jet& a) {
  const int n = a.order();
  std::vector<double> c(n + 1);
  c[0] = std::exp(a.value());
  for (int k = 1; k <= n; ++k) c[k] = c[k - 1] / k;
  return compose_series(a, c);
}

Jet log(const Jet& a) {
  const double a0 = a.value();
  if (!(a0 > 0.0)) throw DomainError("log of non-positive value " + std::to_string(a0));
  const int n = a.order();
  std::vector<double> c(n + 1);
  c[0] = std::log(a0);
  double inv_pow = 1.0;
  for (int k = 1; k <= n; ++k) {
    inv_pow /= a0;
    c[k] = ((k % 2) ? 1.0 : -1.0) * inv_pow / k;
  }
  return compose_series(a, c);
}

namespace {

Jet trig(const Jet& a, int shift) {
  const int n = a.order();
  const double s = std::sin(a.value());
  const double co = std::cos(a.value());
  const double cycle[4] = {s, co, -s, -co};
  std::vector<double> c(n + 1);
  double inv_fact = 1.0;
  for (int k = 0; k <= n; ++k) {
    if (k > 0) inv_fact /= k;
    c[k] = cycle[(k + shift) % 4] * inv_fact;
  }
  return compose_series(a, c);
}

}  // namespace

Jet sin(const Jet& a) { return trig(a, 0); }
Jet cos(const Jet& a) { return trig(a, 1); }

bool is_identity_chart(std::span<const Jet> inner) {
  if (inner.empty()) return false;
  const int nv = inner[0].num_vars();
  if (nv != static_cast<int>(inner.size())) return false;
  const int ord = inner[0].order();
  const auto& l = inner[0].layout();
  for (int i = 0; i < nv; ++i) {
    const Jet& z = inner[i];
    if (z.num_vars() != nv || z.order() != ord) return false;
    auto c = z.taylor();
    for (std::size_t m = 1; m < c.size(); ++m) {
      const bool is_var = l.degree[m] == 1 && l.exponents[m][i] == 1;
      if (c[m] != (is_var ? 1.0 : 0.0)) return false;
    }
  }
  return true;
}

std::vector<Jet> compose(std::span<const Jet> outer, std::span<const Jet> inner) {
  if (outer.empty()) return {};
  const int d = outer[0].num_vars();
  if (static_cast<int>(inner.size()) != d)
    throw std::invalid_argument("compose: need one inner jet per outer variable");
  const int outer_order = outer[0].order();
  for (const Jet& f : outer)
    if (f.num_vars() != d || f.order() != outer_order)
      throw std::invalid_argument("compose: outer jets must share a layout");

  if (is_identity_chart(inner)) {
    std::vector<Jet> out;
    out.reserve(outer.size());
    for (const Jet& f : outer) out.push_back(f.truncated(inner[0].order()));
    return out;
  }

  const int nv = d == 0 ? 0 : inner[0].num_vars();
  int order = outer_order;
  for (const Jet& z : inner) {
    if (z.num_vars() != nv) throw std::invalid_argument("compose: inner jets must share num_vars");
    order = std::min(order, z.order());
  }
  std::vector<Jet> delta;
  delta.reserve(d);
  for (const Jet& z : inner) delta.push_back(z.truncated(order).nilpotent_part());

  const auto& lo = outer[0].layout();
  const int count = lo.degree_offset[order + 1];
  std::vector<Jet> out;
  out.reserve(outer.size());
  for (const Jet& f : outer) out.push_back(Jet::constant(f.value(), nv, order));

  // monomial products delta^alpha built incrementally from their parents
  std::vector<Jet> prod(count);
  prod[0] = Jet::constant(1.0, nv, order);
  for (int m = 1; m < count; ++m) {
    prod[m] = prod[lo.parent[m]] * delta[lo.last_var[m]];
    for (std::size_t q = 0; q < outer.size(); ++q) {
      const double coef = outer[q].taylor()[m];
      if (coef == 0.0) continue;
      auto dst = out[q].taylor_mut();
      auto src = prod[m].taylor();
      for (std::size_t t = 0; t < dst.size(); ++t) dst[t] += coef * src[t];
    }
  }
  return out;
}

Jet compose(const Jet& outer, std::span<const Jet> inner) {
  return compose(std::span<const Jet>(&outer, 1), inner)[0];
}

std::vector<double> values(std::span<const Jet> jets) {
  std::vector<double> out;
  out.reserve(jets.size());
  for (const Jet& j : jets) out.push_back(j.value());
  return out;
}

std::vector<Jet> variables(std::span<const double> point, int order) {
  std::vector<Jet> out;
  const int n = static_cast<int>(point.size());
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(Jet::variable(point[i], i, n, order));
  return out;
}

std::vector<Jet> constants(std::span<const double> point, int num_vars, int order) {
  std::vector<Jet> out;
  out.reserve(point.size());
  for (double v : point) out.push_back(Jet::constant(v, num_vars, order));
  return out;
}

}  // namespace finslab
