#include "finslab/grouplab.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace finslab::grouplab {
namespace {

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

Mat<double> to_mat(const Eigen::MatrixXd& A) {
  Mat<double> m(static_cast<int>(A.rows()), 0.0);
  for (int i = 0; i < m.n(); ++i)
    for (int j = 0; j < m.n(); ++j) m(i, j) = A(i, j);
  return m;
}

Eigen::MatrixXd to_eigen(const Mat<double>& m) {
  Eigen::MatrixXd A(m.n(), m.n());
  for (int i = 0; i < m.n(); ++i)
    for (int j = 0; j < m.n(); ++j) A(i, j) = m(i, j);
  return A;
}

Eigen::MatrixXd entries_to_matrix(const std::vector<double>& e, int n) {
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = e[static_cast<std::size_t>(i) * n + j];
  return A;
}

}  // namespace

MatrixCurve::MatrixCurve(int n, SmoothMap map, std::optional<int> order, std::string name)
    : n_(n), map_(std::move(map)), order_(order), name_(std::move(name)) {
  if (map_.domain_dim() != 1 || map_.codomain_dim() != n * n)
    throw std::invalid_argument("MatrixCurve: map must send t to n*n entries");
  const Eigen::MatrixXd e = (*this)(0.0);
  const double dev = (e - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
  if (dev > 1e-12) {
    std::ostringstream os;
    os << "MatrixCurve '" << name_ << "': value at t = 0 is not the identity (max-abs deviation " << dev << ")";
    throw std::invalid_argument(os.str());
  }
}

Eigen::MatrixXd MatrixCurve::operator()(double t) const { return entries_to_matrix(map_({t}), n_); }

Mat<Jet> MatrixCurve::at(const Jet& t) const {
  const auto e = map_(std::span<const Jet>(&t, 1));
  Mat<Jet> m(n_, e[0]);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) m(i, j) = e[static_cast<std::size_t>(i) * n_ + j];
  return m;
}

MatrixCurve make_curve(int n, MatrixFunction f, std::optional<int> order, std::string name, Box domain) {
  if (domain.dim() == 0) domain = Box::unbounded(1);
  SmoothMap map(
      1, n * n, std::move(domain), [f = std::move(f)](std::span<const Jet> z) { return f(z[0]).data(); }, name);
  return MatrixCurve(n, std::move(map), order, std::move(name));
}

Mat<Jet> to_jet_matrix(const Eigen::MatrixXd& A, const Jet& proto) {
  Mat<Jet> m(static_cast<int>(A.rows()), zero_like(proto));
  for (int i = 0; i < m.n(); ++i)
    for (int j = 0; j < m.n(); ++j) m(i, j) = m(i, j) + A(i, j);
  return m;
}

Eigen::MatrixXd values(const Mat<Jet>& M) {
  Eigen::MatrixXd A(M.n(), M.n());
  for (int i = 0; i < M.n(); ++i)
    for (int j = 0; j < M.n(); ++j) A(i, j) = M(i, j).value();
  return A;
}

MatrixCurve exp_curve(const Eigen::MatrixXd& X, int k) {
  if (k < 1) throw std::invalid_argument("exp_curve: order must be positive");
  const int n = static_cast<int>(X.rows());
  return make_curve(
      n,
      [X, k](const Jet& t) {
        const Jet tk = pow(t, static_cast<double>(k));
        Mat<Jet> m = to_jet_matrix(X, t);
        for (int i = 0; i < m.n(); ++i)
          for (int j = 0; j < m.n(); ++j) m(i, j) = m(i, j) * tk;
        return expm(m);
      },
      k,
      k == 1 ? "exp(tX)" : "exp(t^" + std::to_string(k) + " X)");
}

MatrixCurve polynomial_curve(const std::vector<Eigen::MatrixXd>& A) {
  if (A.empty()) throw std::invalid_argument("polynomial_curve: no coefficients");
  const int n = static_cast<int>(A[0].rows());
  return make_curve(
      n,
      [A, n](const Jet& t) {
        Mat<Jet> m = Mat<Jet>::identity(n, t);
        Jet tp = t;
        for (const auto& a : A) {
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) m(i, j) = m(i, j) + a(i, j) * tp;
          tp = tp * t;
        }
        return m;
      },
      std::nullopt, "polynomial");
}

MatrixCurve identity_curve(int n) {
  return make_curve(n, [n](const Jet& t) { return Mat<Jet>::identity(n, t); }, std::nullopt, "identity");
}

TangentRecord order_of_contact(const MatrixCurve& c, int max_k, ContactMode mode) {
  TangentRecord rec;
  const int n = c.n();
  if (mode == ContactMode::jet) {
    const auto J = c.map().expand(std::vector<double>{0.0}, max_k);
    for (int k = 1; k <= max_k; ++k) {
      std::vector<double> e;
      for (const auto& j : J) e.push_back(j.derivative_along(0, k));
      const Eigen::MatrixXd D = entries_to_matrix(e, n);
      const double m = D.cwiseAbs().maxCoeff();
      if (m > kContactTolerance) {
        rec.order = k;
        rec.direction = D;
        return rec;
      }
      rec.lower_residuals.push_back(m);
    }
    rec.direction = Eigen::MatrixXd::Zero(n, n);
    return rec;
  }
  auto f = [&c](double t) { return c.map()({t}); };
  for (int k = 1; k <= max_k; ++k) {
    const auto d = jets::curve_derivative(f, k, jets::StepSchedule{0.01, 6}, 0.0, true);
    const Eigen::MatrixXd D = entries_to_matrix(d.value, n);
    const double m = D.cwiseAbs().maxCoeff();
    if (m > std::max(kContactTolerance, 10.0 * d.error)) {
      rec.order = k;
      rec.direction = D;
      rec.error = d.error;
      return rec;
    }
    rec.lower_residuals.push_back(m);
  }
  rec.direction = Eigen::MatrixXd::Zero(n, n);
  return rec;
}

int curve_order(const MatrixCurve& c) {
  if (c.order()) return *c.order();
  const auto r = order_of_contact(c, 12);
  if (!r.order) throw std::invalid_argument("curve '" + c.name() + "' has no contact up to order 12");
  return *r.order;
}

namespace {

Mat<Jet> commutator(const Mat<Jet>& P, const Mat<Jet>& Q, CompositionOrder order) {
  const Mat<Jet> Pi = inverse(P), Qi = inverse(Q);
  if (order == CompositionOrder::matrix_product) return Pi * Qi * P * Q;
  return Q * P * Qi * Pi;
}

}  // namespace

Eigen::MatrixXd CommutatorFamily::mixed_derivative(int k, int l) const {
  const std::vector<Jet> ts{Jet::variable(0.0, 0, 2, k + l), Jet::variable(0.0, 1, 2, k + l)};
  const auto e = map(std::span<const Jet>(ts));
  std::vector<double> d;
  for (const auto& j : e) d.push_back(j.derivative({k, l}));
  return entries_to_matrix(d, n);
}

CommutatorFamily commutator_family(const MatrixCurve& phi, const MatrixCurve& psi, CompositionOrder order) {
  if (phi.n() != psi.n()) throw std::invalid_argument("commutator_family: matrix sizes differ");
  CommutatorFamily fam;
  fam.n = phi.n();
  fam.order = order;
  fam.map = SmoothMap(
      2, fam.n * fam.n, Box::unbounded(2),
      [phi, psi, order](std::span<const Jet> z) { return commutator(phi.at(z[0]), psi.at(z[1]), order).data(); },
      "[" + phi.name() + ", " + psi.name() + "]");
  return fam;
}

MatrixCurve commutator_curve(const MatrixCurve& phi, const MatrixCurve& psi, CompositionOrder order) {
  if (phi.n() != psi.n()) throw std::invalid_argument("commutator_curve: matrix sizes differ");
  return make_curve(
      phi.n(), [phi, psi, order](const Jet& t) { return commutator(phi.at(t), psi.at(t), order); }, std::nullopt,
      "[" + phi.name() + ", " + psi.name() + "]");
}

double diagonal_factor(int k, int l) { return factorial(k + l) / (factorial(k) * factorial(l)); }

std::pair<double, double> sum_constants(int k, int l, SumConstants which) {
  if (k < 1 || l < 1) throw std::invalid_argument("sum_constants: orders must be positive");
  const int r = std::lcm(k, l);
  if (which == SumConstants::derived)
    return {std::pow(factorial(k) / factorial(r), 1.0 / k), std::pow(factorial(l) / factorial(r), 1.0 / l)};
  const double m1 = static_cast<double>(r / k), m2 = static_cast<double>(r / l);
  return {std::pow(std::pow(m1, k) * factorial(r - k), -1.0 / r), std::pow(std::pow(m2, l) * factorial(r - l), -1.0 / r)};
}

MatrixCurve sum_curve(const MatrixCurve& phi, const MatrixCurve& psi, SumConstants which) {
  if (phi.n() != psi.n()) throw std::invalid_argument("sum_curve: matrix sizes differ");
  const int k = curve_order(phi), l = curve_order(psi);
  const int r = std::lcm(k, l);
  const auto [c1, c2] = sum_constants(k, l, which);
  const double m1 = r / k, m2 = r / l;
  return make_curve(
      phi.n(), [=](const Jet& t) { return phi.at(c1 * pow(t, m1)) * psi.at(c2 * pow(t, m2)); }, std::nullopt,
      phi.name() + " + " + psi.name());
}

MatrixCurve inverse_curve(const MatrixCurve& phi) {
  return make_curve(phi.n(), [phi](const Jet& t) { return inverse(phi.at(t)); }, phi.order(), phi.name() + "^-1",
                    phi.map().domain());
}

MatrixCurve scale_curve(const MatrixCurve& phi, double lambda) {
  if (lambda == 0.0) return identity_curve(phi.n());
  const int k = curve_order(phi);
  const double a = std::pow(std::abs(lambda), 1.0 / k);
  std::ostringstream name;
  name << lambda << " " << phi.name();
  auto scaled = make_curve(phi.n(), [phi, a](const Jet& t) { return phi.at(a * t); }, k, name.str());
  return lambda > 0.0 ? scaled : inverse_curve(scaled);
}

MatrixCurve weak_tangency_reparam(const MatrixCurve& phi, ReparamConstant which) {
  const int k = curve_order(phi);
  const double kf = factorial(k);
  MatrixFunction f;
  if (which == ReparamConstant::derived)
    f = [phi, k, kf](const Jet& t) { return phi.at(k == 1 ? t : pow(kf * t, 1.0 / k)); };
  else
    f = [phi, k, kf](const Jet& t) { return phi.at(k == 1 ? t : kf * pow(t, 1.0 / k)); };
  return make_curve(phi.n(), f, std::nullopt, "sigma(" + phi.name() + ")",
                    Box({0.0}, {std::numeric_limits<double>::infinity()}));
}

ExpIterate exp_iterate(const MatrixCurve& psi, double t, int n) {
  if (n < 1) throw std::invalid_argument("exp_iterate: n must be at least 1");
  const auto J = psi.map().expand(std::vector<double>{0.0}, 1);
  std::vector<double> e;
  for (const auto& j : J) e.push_back(j.derivative_along(0, 1));
  const Eigen::MatrixXd X = entries_to_matrix(e, psi.n());
  const double norm = std::abs(t) * X.cwiseAbs().rowwise().sum().maxCoeff();
  if (norm > kExpNormLimit) {
    std::ostringstream os;
    os << "exp_iterate: |t X| = " << norm << " exceeds the limit " << kExpNormLimit;
    throw std::invalid_argument(os.str());
  }
  ExpIterate out;
  Mat<double> base = to_mat(psi(t / n));
  Mat<double> acc = Mat<double>::identity(psi.n(), 0.0);
  for (int m = n; m > 0; m >>= 1) {
    if (m & 1) acc = acc * base;
    if (m > 1) base = base * base;
  }
  out.power = to_eigen(acc);
  out.exponential = to_eigen(expm(to_mat(X) * t));
  out.distance = (out.power - out.exponential).cwiseAbs().maxCoeff();
  return out;
}

}  // namespace finslab::grouplab
