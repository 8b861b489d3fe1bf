#include "finslab/finsler.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "finslab/expression.hpp"
#include "finslab/matrix.hpp"

namespace finslab {

ChartManifold::ChartManifold(int dim_, Box chart_, std::string name_)
    : dim(dim_), chart(std::move(chart_)), name(std::move(name_)) {
  if (dim < 1) throw std::invalid_argument("ChartManifold: dimension must be positive");
  if (chart.dim() != dim) throw std::invalid_argument("ChartManifold: chart box dimension mismatch");
  if (chart.empty()) throw std::invalid_argument("ChartManifold: empty chart domain");
}

void ChartManifold::require_inside(std::span<const double> x) const {
  if (!chart.contains(x)) {
    std::ostringstream os;
    os << "point (";
    for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
    os << ") is outside the chart of '" << name << "'";
    throw DomainError(os.str());
  }
}

FinslerNorm::FinslerNorm(ChartManifold manifold, SmoothMap F, bool riemannian)
    : manifold_(std::move(manifold)), F_(std::move(F)), riemannian_(riemannian) {
  if (F_.domain_dim() != 2 * manifold_.dim || F_.codomain_dim() != 1)
    throw std::invalid_argument("FinslerNorm: F must map 2n bundle coordinates to a scalar");
}

double FinslerNorm::operator()(std::span<const double> x, std::span<const double> y) const {
  std::vector<double> z(x.begin(), x.end());
  z.insert(z.end(), y.begin(), y.end());
  return F_(z)[0];
}

Jet FinslerNorm::operator()(std::span<const Jet> xy) const { return F_(xy)[0]; }

namespace {

void require_bundle_point(const FinslerNorm& F, std::span<const double> xy) {
  const int n = F.dim();
  if (static_cast<int>(xy.size()) != 2 * n) throw std::invalid_argument("expected a 2n-dimensional bundle point");
  F.manifold().require_inside(xy.first(n));
  double norm = 0.0;
  for (int i = 0; i < n; ++i) norm += xy[n + i] * xy[n + i];
  if (!(norm > 0.0)) throw DomainError("tangent vector y must be nonzero");
}

std::vector<double> concat(std::span<const double> a, std::span<const double> b) {
  std::vector<double> z(a.begin(), a.end());
  z.insert(z.end(), b.begin(), b.end());
  return z;
}

void check_metric_values(const Eigen::MatrixXd& g, double* min_eig, double* cond) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (min_eig) *min_eig = lo;
  if (!(lo > 0.0)) {
    std::ostringstream os;
    os << "metric tensor is not positive definite (smallest eigenvalue " << lo << ")";
    throw SingularMetricError(os.str());
  }
  const double c = hi / lo;
  if (cond) *cond = c;
  if (c > kMetricConditionLimit) {
    std::ostringstream os;
    os << "metric tensor is ill-conditioned (condition number " << c << " > " << kMetricConditionLimit << ")";
    throw SingularMetricError(os.str());
  }
}

}  // namespace

std::vector<Jet> metric_expansion(const FinslerNorm& F, std::span<const double> xy, int order) {
  require_bundle_point(F, xy);
  const int n = F.dim();
  const Jet f = F.F().expand(xy, order + 2)[0];
  const Jet E = f * f;
  std::vector<Jet> g;
  g.reserve(n * n);
  std::vector<Jet> Ey;
  for (int i = 0; i < n; ++i) Ey.push_back(E.partial(n + i));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (j < i) g.push_back(g[j * n + i]);
      else g.push_back(Ey[i].partial(n + j) * 0.5);
    }
  return g;
}

std::vector<Jet> spray_expansion(const FinslerNorm& F, std::span<const double> xy, int order) {
  const int n = F.dim();
  const auto g = metric_expansion(F, xy, order + 1);
  Mat<Jet> gm(n, Jet::constant(0.0, 2 * n, order));
  Eigen::MatrixXd gv(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      gm(i, j) = g[i * n + j].truncated(order);
      gv(i, j) = g[i * n + j].value();
    }
  check_metric_values(gv, nullptr, nullptr);
  const Mat<Jet> ginv = inverse(gm);

  // dg[(j*n + l)*n + k] = d g_jl / dx^k
  std::vector<Jet> dg;
  dg.reserve(n * n * n);
  for (int j = 0; j < n; ++j)
    for (int l = 0; l < n; ++l)
      for (int k = 0; k < n; ++k) dg.push_back(g[j * n + l].partial(k));
  auto d = [&](int j, int l, int k) -> const Jet& { return dg[(j * n + l) * n + k]; };

  std::vector<Jet> y;
  for (int j = 0; j < n; ++j) y.push_back(Jet::variable(xy[n + j], n + j, 2 * n, order));
  std::vector<Jet> yy;  // y^j y^k
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) yy.push_back(y[j] * y[k]);

  std::vector<Jet> A;  // A_l = (2 d_k g_jl - d_l g_jk) y^j y^k
  for (int l = 0; l < n; ++l) {
    Jet a = Jet::constant(0.0, 2 * n, order);
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) a += (2.0 * d(j, l, k) - d(j, k, l)) * yy[j * n + k];
    A.push_back(std::move(a));
  }
  std::vector<Jet> G;
  for (int i = 0; i < n; ++i) {
    Jet s = Jet::constant(0.0, 2 * n, order);
    for (int l = 0; l < n; ++l) s += ginv(i, l) * A[l];
    G.push_back(s * 0.25);
  }
  return G;
}

MetricTensor metric_tensor(const FinslerNorm& F, std::span<const double> x, std::span<const double> y) {
  const int n = F.dim();
  const auto xy = concat(x, y);
  const auto g = metric_expansion(F, xy, 0);
  MetricTensor out;
  out.x.assign(x.begin(), x.end());
  out.y.assign(y.begin(), y.end());
  out.g.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out.g(i, j) = g[i * n + j].value();
  check_metric_values(out.g, &out.min_eigenvalue, &out.condition);
  return out;
}

SprayData geodesic_coefficients(const FinslerNorm& F, std::span<const double> x, std::span<const double> y) {
  const int n = F.dim();
  const auto xy = concat(x, y);
  const auto G = spray_expansion(F, xy, 2);
  SprayData s;
  s.x.assign(x.begin(), x.end());
  s.y.assign(y.begin(), y.end());
  s.G.resize(n);
  s.Gj.resize(n, n);
  s.Gjk.assign(n, Eigen::MatrixXd(n, n));
  std::vector<int> alpha(2 * n, 0);
  for (int i = 0; i < n; ++i) {
    s.G(i) = G[i].value();
    for (int j = 0; j < n; ++j) {
      alpha[n + j] += 1;
      s.Gj(i, j) = G[i].derivative(alpha);
      for (int k = 0; k < n; ++k) {
        alpha[n + k] += 1;
        s.Gjk[i](j, k) = G[i].derivative(alpha);
        alpha[n + k] -= 1;
      }
      alpha[n + j] -= 1;
    }
  }
  return s;
}

namespace {

// G^i_j = Gamma^i_jk y^k, with g(x) recovered from F^2 by polarization on x-jets
// of order 1. Avoids the order-4 jets in 2n variables of the general path.
Eigen::MatrixXd riemannian_connection(const FinslerNorm& F, std::span<const double> x, std::span<const double> y) {
  const int n = F.dim();
  auto energy = [&](int a, int b) {
    std::vector<Jet> z;
    for (int i = 0; i < n; ++i) z.push_back(Jet::variable(x[i], i, n, 1));
    for (int j = 0; j < n; ++j) z.push_back(Jet::constant((j == a) + (j == b && b != a), n, 1));
    const Jet f = F(z);
    return f * f;
  };
  std::vector<Jet> sq;
  for (int i = 0; i < n; ++i) sq.push_back(energy(i, i));
  Eigen::MatrixXd g(n, n);
  std::vector<Eigen::MatrixXd> dg(n, Eigen::MatrixXd(n, n));  // dg[k](i, j) = d_k g_ij
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const Jet gij = i == j ? sq[i] : 0.5 * (energy(i, j) - sq[i] - sq[j]);
      g(i, j) = g(j, i) = gij.value();
      for (int k = 0; k < n; ++k) dg[k](i, j) = dg[k](j, i) = gij.partial(k).value();
    }
  check_metric_values(g, nullptr, nullptr);
  const Eigen::MatrixXd ginv = g.inverse();
  Eigen::MatrixXd Gj = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double gamma = 0.0;
        for (int l = 0; l < n; ++l) gamma += ginv(i, l) * (dg[j](l, k) + dg[k](l, j) - dg[l](j, k));
        Gj(i, j) += 0.5 * gamma * y[k];
      }
  return Gj;
}

}  // namespace

Eigen::MatrixXd nonlinear_connection(const FinslerNorm& F, std::span<const double> x, std::span<const double> y) {
  const int n = F.dim();
  if (F.riemannian()) {
    require_bundle_point(F, concat(x, y));
    return riemannian_connection(F, x, y);
  }
  const auto G = spray_expansion(F, concat(x, y), 1);
  Eigen::MatrixXd Gj(n, n);
  std::vector<int> alpha(2 * n, 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      alpha[n + j] = 1;
      Gj(i, j) = G[i].derivative(alpha);
      alpha[n + j] = 0;
    }
  return Gj;
}

Eigen::VectorXd horizontal_lift(const FinslerNorm& F, std::span<const double> X, std::span<const double> x,
                                std::span<const double> y) {
  const int n = F.dim();
  if (static_cast<int>(X.size()) != n) throw std::invalid_argument("horizontal_lift: X has wrong dimension");
  const Eigen::MatrixXd Gj = nonlinear_connection(F, x, y);
  const Eigen::Map<const Eigen::VectorXd> Xv(X.data(), n);
  Eigen::VectorXd out(2 * n);
  out.head(n) = Xv;
  out.tail(n) = -Gj * Xv;
  return out;
}

HorizontalVertical split_horizontal_vertical(const FinslerNorm& F, std::span<const double> x,
                                             std::span<const double> y, std::span<const double> V) {
  const int n = F.dim();
  if (static_cast<int>(V.size()) != 2 * n) throw std::invalid_argument("split: V must have 2n components");
  HorizontalVertical out;
  out.horizontal = horizontal_lift(F, V.first(n), x, y);
  out.vertical = Eigen::Map<const Eigen::VectorXd>(V.data(), 2 * n) - out.horizontal;
  out.vertical.head(n).setZero();
  return out;
}

SmoothMap horizontal_lift_field(const FinslerNorm& F, const SmoothMap& X) {
  const int n = F.dim();
  if (X.domain_dim() != n || X.codomain_dim() != n)
    throw std::invalid_argument("horizontal_lift_field: X must be a vector field on the chart");
  const Box box = F.manifold().chart.times(Box::unbounded(n));
  auto expander = [F, X, n](std::span<const double> z0, int order) {
    const auto G = spray_expansion(F, z0, order + 1);
    const auto vars = variables(z0, order);
    const auto Xj = X(std::span<const Jet>(vars.data(), n));
    std::vector<Jet> out(Xj.begin(), Xj.end());
    for (int k = 0; k < n; ++k) {
      Jet s = Jet::constant(0.0, 2 * n, order);
      for (int i = 0; i < n; ++i) s -= G[k].partial(n + i) * Xj[i];
      out.push_back(std::move(s));
    }
    return out;
  };
  return SmoothMap::from_expansion(2 * n, 2 * n, box, expander, X.name() + "^h",
                                   4 + F.F().order_overhead() + X.order_overhead());
}

std::vector<double> to_indicatrix(const FinslerNorm& F, std::span<const double> p, std::span<const double> y) {
  const double f = F(p, y);
  std::vector<double> out(y.begin(), y.end());
  for (double& v : out) v /= f;
  return out;
}

namespace catalog {
namespace {

Jet sum_of_squares(std::span<const Jet> v) {
  Jet s = v[0] * v[0];
  for (std::size_t i = 1; i < v.size(); ++i) s += v[i] * v[i];
  return s;
}

}  // namespace

FinslerNorm euclidean(int n) {
  if (n < 2 || n > 4) throw std::invalid_argument("euclidean: supported dimensions are 2..4");
  ChartManifold M(n, Box(std::vector<double>(n, -5.0), std::vector<double>(n, 5.0)), "euclidean");
  SmoothMap F(
      2 * n, 1, M.chart.times(Box::unbounded(n)),
      [n](std::span<const Jet> z) { return std::vector<Jet>{sqrt(sum_of_squares(z.subspan(n)))}; }, "|y|");
  return FinslerNorm(M, F, true);
}

FinslerNorm sphere() {
  const double pi = std::numbers::pi;
  ChartManifold M(2, Box({0.2, -3.0}, {pi - 0.2, 3.0}), "sphere");
  SmoothMap F(
      4, 1, M.chart.times(Box::unbounded(2)),
      [](std::span<const Jet> z) {
        const Jet s = sin(z[0]);
        return std::vector<Jet>{sqrt(z[2] * z[2] + s * s * z[3] * z[3])};
      },
      "sqrt(y1^2 + sin(x1)^2 y2^2)");
  return FinslerNorm(M, F, true);
}

FinslerNorm flat_torus() {
  const double tau = 2.0 * std::numbers::pi;
  ChartManifold M(2, Box({0.0, 0.0}, {tau, tau}), "flat-torus");
  SmoothMap F(
      4, 1, M.chart.times(Box::unbounded(2)),
      [](std::span<const Jet> z) {
        return std::vector<Jet>{sqrt(z[2] * z[2] + z[2] * z[3] + 2.0 * z[3] * z[3])};
      },
      "sqrt(y1^2 + y1 y2 + 2 y2^2)");
  return FinslerNorm(M, F, true);
}

FinslerNorm funk() {
  ChartManifold M(2, Box({-0.63, -0.63}, {0.63, 0.63}), "funk");
  SmoothMap F(
      4, 1, M.chart.times(Box::unbounded(2)),
      [](std::span<const Jet> z) {
        const Jet r = 1.0 - (z[0] * z[0] + z[1] * z[1]);
        const Jet xy = z[0] * z[2] + z[1] * z[3];
        const Jet yy = z[2] * z[2] + z[3] * z[3];
        return std::vector<Jet>{(sqrt(r * yy + xy * xy) + xy) / r};
      },
      "funk(unit disk)");
  return FinslerNorm(M, F, false);
}

std::vector<std::string> names() { return {"euclidean", "euclidean3", "euclidean4", "sphere", "flat-torus", "funk"}; }

FinslerNorm by_name(const std::string& key) {
  if (key == "euclidean" || key == "euclidean2") return euclidean(2);
  if (key == "euclidean3") return euclidean(3);
  if (key == "euclidean4") return euclidean(4);
  if (key == "sphere") return sphere();
  if (key == "flat-torus" || key == "torus") return flat_torus();
  if (key == "funk") return funk();
  throw std::invalid_argument("unknown metric '" + key + "'");
}

}  // namespace catalog

FinslerNorm metric_from_expression(const std::string& F, int n, Box chart, std::string name, bool riemannian) {
  ChartManifold M(n, std::move(chart), name);
  auto map = expression_map({F}, bundle_variable_names(n), M.chart.times(Box::unbounded(n)), F);
  return FinslerNorm(M, map, riemannian);
}

}  // namespace finslab
