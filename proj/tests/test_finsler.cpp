#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "finslab/finsler.hpp"
#include "finslab/matrix.hpp"

using namespace finslab;

namespace {

const double pi = std::numbers::pi;

std::vector<FinslerNorm> all_metrics() {
  return {catalog::euclidean(2), catalog::euclidean(3), catalog::euclidean(4), catalog::sphere(),
          catalog::flat_torus(), catalog::funk()};
}

struct BundlePoint {
  std::vector<double> x, y;
};

BundlePoint random_point(const FinslerNorm& F, std::mt19937_64& rng) {
  const auto& box = F.manifold().chart;
  BundlePoint b;
  for (int i = 0; i < F.dim(); ++i) {
    std::uniform_real_distribution<double> u(box.lo[i] + 0.05, box.hi[i] - 0.05);
    b.x.push_back(u(rng));
  }
  std::normal_distribution<double> nd;
  for (int i = 0; i < F.dim(); ++i) b.y.push_back(nd(rng));
  return b;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

// Independent spray oracle: G^i = 1/4 g^{il} (E_{x^k y^l} y^k - E_{x^l}), E = F^2.
Eigen::VectorXd spray_oracle(const FinslerNorm& F, const BundlePoint& b) {
  const int n = F.dim();
  std::vector<double> z = b.x;
  z.insert(z.end(), b.y.begin(), b.y.end());
  const Jet f = F.F().expand(z, 2)[0];
  const Jet E = f * f;
  Eigen::MatrixXd g(n, n);
  Eigen::VectorXd rhs(n);
  std::vector<int> a(2 * n, 0);
  for (int l = 0; l < n; ++l) {
    for (int j = 0; j < n; ++j) {
      a.assign(2 * n, 0);
      a[n + l] += 1;
      a[n + j] += 1;
      g(l, j) = 0.5 * E.derivative(a);
    }
    double s = 0.0;
    for (int k = 0; k < n; ++k) {
      a.assign(2 * n, 0);
      a[k] = 1;
      a[n + l] = 1;
      s += E.derivative(a) * b.y[k];
    }
    a.assign(2 * n, 0);
    a[l] = 1;
    rhs(l) = s - E.derivative(a);
  }
  return 0.25 * g.inverse() * rhs;
}

}  // namespace

TEST_CASE("euclidean metric tensor is the identity and the spray vanishes") {
  const auto F = catalog::euclidean(2);
  const auto g = metric_tensor(F, std::vector<double>{0.3, -1.0}, std::vector<double>{2.0, 0.5});
  CHECK((g.g - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);
  const auto s = geodesic_coefficients(F, std::vector<double>{0.3, -1.0}, std::vector<double>{2.0, 0.5});
  CHECK(s.G.cwiseAbs().maxCoeff() == 0.0);
  CHECK(s.Gj.cwiseAbs().maxCoeff() == 0.0);
  for (const auto& m : s.Gjk) CHECK(m.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sphere metric tensor at theta = pi/3") {
  const auto F = catalog::sphere();
  for (auto y : {std::vector<double>{1.0, 0.0}, std::vector<double>{0.3, -2.0}, std::vector<double>{0.0, 1.0}}) {
    const auto g = metric_tensor(F, std::vector<double>{pi / 3, 0.4}, y);
    CHECK(g.g(0, 0) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(g.g(1, 1) == doctest::Approx(0.75).epsilon(1e-13));
    CHECK(std::abs(g.g(0, 1)) < 1e-13);
  }
}

TEST_CASE("funk metric at the origin is the identity and is not Riemannian elsewhere") {
  const auto F = catalog::funk();
  const auto g = metric_tensor(F, std::vector<double>{0.0, 0.0}, std::vector<double>{0.4, 1.3});
  CHECK((g.g - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-13);
  CHECK(F(std::vector<double>{0.0, 0.0}, std::vector<double>{3.0, 4.0}) == doctest::Approx(5.0));
  const auto g1 = metric_tensor(F, std::vector<double>{0.3, 0.0}, std::vector<double>{1.0, 0.0});
  const auto g2 = metric_tensor(F, std::vector<double>{0.3, 0.0}, std::vector<double>{0.0, 1.0});
  CHECK((g1.g - g2.g).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("sphere spray matches the Christoffel closed form") {
  const auto F = catalog::sphere();
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const auto b = random_point(F, rng);
    const auto s = geodesic_coefficients(F, b.x, b.y);
    const double th = b.x[0];
    const double Gth = -0.5 * std::sin(th) * std::cos(th) * b.y[1] * b.y[1];
    const double Gph = std::cos(th) / std::sin(th) * b.y[0] * b.y[1];
    CHECK(rel(s.G(0), Gth) < 1e-10);
    CHECK(rel(s.G(1), Gph) < 1e-10);
    const auto s2 = geodesic_coefficients(F, b.x, std::vector<double>{2 * b.y[0], 2 * b.y[1]});
    CHECK(rel(s2.G(0), 4 * s.G(0)) < 1e-10);
    CHECK(rel(s2.G(1), 4 * s.G(1)) < 1e-10);
  }
}

TEST_CASE("flat torus has vanishing spray") {
  const auto F = catalog::flat_torus();
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const auto b = random_point(F, rng);
    CHECK(geodesic_coefficients(F, b.x, b.y).G.cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("spray formula agrees with the energy-based oracle on every catalog metric") {
  std::mt19937_64 rng(3);
  for (const auto& F : all_metrics()) {
    for (int trial = 0; trial < 20; ++trial) {
      const auto b = random_point(F, rng);
      const auto s = geodesic_coefficients(F, b.x, b.y);
      const auto o = spray_oracle(F, b);
      for (int i = 0; i < F.dim(); ++i) CHECK(rel(s.G(i), o(i)) < 1e-10);
    }
  }
}

TEST_CASE("Christoffel connection agrees with the general spray path") {
  std::mt19937_64 rng(4);
  for (const auto& F : all_metrics()) {
    if (!F.riemannian()) continue;
    CAPTURE(F.name());
    for (int trial = 0; trial < 20; ++trial) {
      const auto b = random_point(F, rng);
      const Eigen::MatrixXd fast = nonlinear_connection(F, b.x, b.y);
      const Eigen::MatrixXd general = geodesic_coefficients(F, b.x, b.y).Gj;
      CHECK((fast - general).cwiseAbs().maxCoeff() < 1e-12 * std::max(1.0, general.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("homogeneity and Euler identities at 100 randomized points") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> lam(0.1, 10.0);
  for (const auto& F : all_metrics()) {
    for (int trial = 0; trial < 100; ++trial) {
      const auto b = random_point(F, rng);
      const double l = lam(rng);
      std::vector<double> ly = b.y;
      for (double& v : ly) v *= l;
      CHECK(rel(F(b.x, ly), l * F(b.x, b.y)) < 1e-10);
      const auto g = metric_tensor(F, b.x, b.y);
      const auto gl = metric_tensor(F, b.x, ly);
      CHECK((g.g - gl.g).cwiseAbs().maxCoeff() <= 1e-8 * std::max(1.0, g.g.cwiseAbs().maxCoeff()));
      CHECK(g.min_eigenvalue > 0.0);
      CHECK((g.g - g.g.transpose()).cwiseAbs().maxCoeff() == 0.0);

      const auto s = geodesic_coefficients(F, b.x, b.y);
      const Eigen::Map<const Eigen::VectorXd> y(b.y.data(), F.dim());
      const Eigen::VectorXd euler1 = s.Gj * y;
      const double scale = std::max(1.0, s.G.cwiseAbs().maxCoeff());
      CHECK((euler1 - 2 * s.G).cwiseAbs().maxCoeff() <= 1e-8 * scale);
      for (int i = 0; i < F.dim(); ++i) {
        const Eigen::VectorXd euler2 = s.Gjk[i] * y;
        CHECK((euler2 - s.Gj.row(i).transpose()).cwiseAbs().maxCoeff() <=
              1e-8 * std::max(1.0, s.Gj.cwiseAbs().maxCoeff()));
        CHECK((s.Gjk[i] - s.Gjk[i].transpose()).cwiseAbs().maxCoeff() <= 1e-10);
      }
    }
  }
}

TEST_CASE("horizontal lift") {
  const auto E = catalog::euclidean(2);
  const auto h = horizontal_lift(E, std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, 0.0},
                                 std::vector<double>{0.3, 0.2});
  CHECK(h(0) == 1.0);
  CHECK(h.tail(3).cwiseAbs().maxCoeff() == 0.0);

  const auto S = catalog::sphere();
  const auto hs = horizontal_lift(S, std::vector<double>{1.0, 0.0}, std::vector<double>{pi / 3, 0.0},
                                  std::vector<double>{0.0, 1.0});
  CHECK(hs(0) == 1.0);
  CHECK(hs(1) == 0.0);
  CHECK(std::abs(hs(2)) < 1e-14);
  CHECK(hs(3) == doctest::Approx(-1.0 / std::tan(pi / 3)).epsilon(1e-13));
}

TEST_CASE("horizontal and vertical projectors") {
  const auto E = catalog::euclidean(2);
  const auto s = split_horizontal_vertical(E, std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, 0.0},
                                           std::vector<double>{1, 1, 1, 1});
  CHECK(s.horizontal == Eigen::Vector4d(1, 1, 0, 0));
  CHECK(s.vertical == Eigen::Vector4d(0, 0, 1, 1));

  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  for (const auto& F : all_metrics()) {
    const int n = F.dim();
    for (int trial = 0; trial < 10; ++trial) {
      const auto b = random_point(F, rng);
      std::vector<double> V(2 * n);
      for (double& v : V) v = nd(rng);
      const auto hv = split_horizontal_vertical(F, b.x, b.y, V);
      const Eigen::Map<const Eigen::VectorXd> Vv(V.data(), 2 * n);
      CHECK((hv.horizontal + hv.vertical - Vv).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(hv.vertical.head(n).cwiseAbs().maxCoeff() == 0.0);
      const std::vector<double> h(hv.horizontal.data(), hv.horizontal.data() + 2 * n);
      const auto hh = split_horizontal_vertical(F, b.x, b.y, h);
      CHECK((hh.horizontal - hv.horizontal).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(hh.vertical.cwiseAbs().maxCoeff() < 1e-12);
      const std::vector<double> v(hv.vertical.data(), hv.vertical.data() + 2 * n);
      const auto vv = split_horizontal_vertical(F, b.x, b.y, v);
      CHECK((vv.vertical - hv.vertical).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(vv.horizontal.cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("lifted field agrees with the pointwise lift") {
  const auto S = catalog::sphere();
  const SmoothMap X(2, 2, Box::unbounded(2), [](std::span<const Jet> x) {
    return std::vector<Jet>{sin(x[1]), x[0] * x[1]};
  });
  const auto Xh = horizontal_lift_field(S, X);
  const std::vector<double> z{1.1, 0.4, 0.7, -0.3};
  const auto a = Xh(z);
  const auto b = horizontal_lift(S, X(std::vector<double>{1.1, 0.4}), std::vector<double>{1.1, 0.4},
                                 std::vector<double>{0.7, -0.3});
  for (int i = 0; i < 4; ++i) CHECK(a[i] == doctest::Approx(b(i)).epsilon(1e-13));
}

TEST_CASE("invalid inputs are rejected") {
  const auto S = catalog::sphere();
  CHECK_THROWS_AS(metric_tensor(S, std::vector<double>{0.1, 0.0}, std::vector<double>{1.0, 0.0}), DomainError);
  CHECK_THROWS_AS(metric_tensor(S, std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, 0.0}), DomainError);
  const auto thin = metric_from_expression("sqrt(y1^2 + 1e-14*y2^2)", 2, Box({-1, -1}, {1, 1}));
  CHECK_THROWS_AS(geodesic_coefficients(thin, std::vector<double>{0, 0}, std::vector<double>{1, 1}),
                  SingularMetricError);
  const auto indefinite = metric_from_expression("sqrt(4*y1^2 - y2^2)", 2, Box({-1, -1}, {1, 1}));
  CHECK_THROWS_AS(metric_tensor(indefinite, std::vector<double>{0, 0}, std::vector<double>{1, 0.5}),
                  SingularMetricError);
}

TEST_CASE("expression metric reproduces the catalog sphere") {
  const auto S = catalog::sphere();
  const auto E = metric_from_expression("sqrt(y1^2 + sin(x1)^2*y2^2)", 2, S.manifold().chart);
  const auto a = geodesic_coefficients(S, std::vector<double>{1.0, 0.5}, std::vector<double>{0.3, 0.8});
  const auto b = geodesic_coefficients(E, std::vector<double>{1.0, 0.5}, std::vector<double>{0.3, 0.8});
  CHECK((a.G - b.G).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("jet matrix inverse and exponential") {
  Mat<double> a(2, 0.0);
  a(0, 0) = 2;
  a(0, 1) = 1;
  a(1, 0) = 1;
  a(1, 1) = 3;
  const auto inv = inverse(a);
  const auto id = a * inv;
  CHECK(std::abs(id(0, 0) - 1) < 1e-15);
  CHECK(std::abs(id(0, 1)) < 1e-15);
  Mat<double> z(2, 0.0);
  CHECK_THROWS_AS(inverse(z), SingularMatrixError);
  Mat<double> rot(2, 0.0);
  rot(0, 1) = -1.0;
  rot(1, 0) = 1.0;
  const auto e = expm(rot * 2.0);
  CHECK(e(0, 0) == doctest::Approx(std::cos(2.0)).epsilon(1e-14));
  CHECK(e(1, 0) == doctest::Approx(std::sin(2.0)).epsilon(1e-14));
}
