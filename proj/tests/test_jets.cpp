#include <cmath>
#include <random>

#include "doctest.h"
#include "finslab/derivatives.hpp"
#include "finslab/expression.hpp"
#include "finslab/jet.hpp"
#include "finslab/smooth_map.hpp"

using namespace finslab;
using finslab::jets::DiffMode;

namespace {

SmoothMap curve(std::function<Jet(const Jet&)> f) {
  return SmoothMap(1, 1, Box::unbounded(1), [f](std::span<const Jet> z) { return std::vector<Jet>{f(z[0])}; });
}

// Dense polynomial in two variables, coefficients c[i][j] for x^i y^j, i + j <= deg.
struct Poly2 {
  std::vector<std::vector<double>> c;
  template <class T>
  T operator()(const T& x, const T& y, const T& one) const {
    T acc = one * 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      for (std::size_t j = 0; j < c[i].size(); ++j) {
        T term = one * c[i][j];
        for (std::size_t p = 0; p < i; ++p) term = term * x;
        for (std::size_t p = 0; p < j; ++p) term = term * y;
        acc = acc + term;
      }
    }
    return acc;
  }
  // closed-form partial derivative d^a/dx^a d^b/dy^b at (x, y)
  double partial(int a, int b, double x, double y) const {
    double s = 0.0;
    for (int i = 0; i < static_cast<int>(c.size()); ++i) {
      for (int j = 0; j < static_cast<int>(c[i].size()); ++j) {
        if (i < a || j < b) continue;
        double f = c[i][j];
        for (int q = 0; q < a; ++q) f *= i - q;
        for (int q = 0; q < b; ++q) f *= j - q;
        s += f * std::pow(x, i - a) * std::pow(y, j - b);
      }
    }
    return s;
  }
};

Poly2 random_poly(std::mt19937_64& rng, int deg) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Poly2 p;
  p.c.resize(deg + 1);
  for (int i = 0; i <= deg; ++i) {
    p.c[i].resize(deg + 1 - i);
    for (auto& v : p.c[i]) v = u(rng);
  }
  return p;
}

}  // namespace

TEST_CASE("square at 3 carries value, slope and normalized curvature") {
  const Jet x = Jet::variable(3.0, 0, 1, 2);
  const Jet f = x * x;
  CHECK(f.taylor()[0] == 9.0);
  CHECK(f.taylor()[1] == 6.0);
  CHECK(f.derivative_along(0, 2) == 2.0);
}

TEST_CASE("x times x at 1") {
  const Jet x = Jet::variable(1.0, 0, 1, 2);
  const Jet f = x * x;
  CHECK(f.derivatives() == std::vector<double>{1.0, 2.0, 2.0});
}

TEST_CASE("sqrt of x squared at 2 is x") {
  const Jet x = Jet::variable(2.0, 0, 1, 2);
  const Jet r = sqrt(x * x);
  CHECK(r.derivative_along(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(r.derivative_along(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(r.derivative_along(0, 2)) < 1e-15);
}

TEST_CASE("domain violations are rejected") {
  const Jet x = Jet::variable(-1.0, 0, 1, 3);
  CHECK_THROWS_AS(sqrt(x), DomainError);
  CHECK_THROWS_AS(log(x), DomainError);
  CHECK_THROWS_AS(log(x + 1.0), DomainError);
  CHECK_THROWS_AS(Jet::constant(1.0, 1, 2) / (x + 1.0), DomainError);
  CHECK_THROWS_AS(pow(x, 0.5), DomainError);
  CHECK_NOTHROW(pow(x, 3.0));
  CHECK(pow(x, 3.0).derivative_along(0, 1) == doctest::Approx(3.0));
  CHECK(pow(x, -2.0).derivative_along(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("elementary functions match closed-form derivatives") {
  const double a = 0.7;
  const Jet x = Jet::variable(a, 0, 1, 6);
  const Jet e = exp(2.0 * x);
  const Jet s = sin(x);
  const Jet c = cos(x);
  const Jet l = log(x);
  const Jet p = pow(x, 1.5);
  for (int k = 0; k <= 6; ++k) {
    CHECK(e.derivative_along(0, k) == doctest::Approx(std::pow(2.0, k) * std::exp(2 * a)).epsilon(1e-13));
    const double sk[] = {std::sin(a), std::cos(a), -std::sin(a), -std::cos(a)};
    CHECK(s.derivative_along(0, k) == doctest::Approx(sk[k % 4]).epsilon(1e-13));
    CHECK(c.derivative_along(0, k) == doctest::Approx(sk[(k + 1) % 4]).epsilon(1e-13));
    if (k >= 1) {
      double dl = 1.0;
      for (int q = 1; q < k; ++q) dl *= -q;
      CHECK(l.derivative_along(0, k) == doctest::Approx(dl / std::pow(a, k)).epsilon(1e-12));
    }
    double dp = 1.0;
    for (int q = 0; q < k; ++q) dp *= 1.5 - q;
    CHECK(p.derivative_along(0, k) == doctest::Approx(dp * std::pow(a, 1.5 - k)).epsilon(1e-12));
  }
}

TEST_CASE("polynomials are reproduced exactly") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> small(-4, 4);
  for (int trial = 0; trial < 50; ++trial) {
    Poly2 p;
    p.c.resize(5);
    for (int i = 0; i <= 4; ++i) {
      p.c[i].resize(5 - i);
      for (auto& v : p.c[i]) v = small(rng);
    }
    const double x0 = small(rng), y0 = small(rng);
    const auto vars = variables(std::vector<double>{x0, y0}, 4);
    const Jet one = Jet::constant(1.0, 2, 4);
    const Jet f = p(vars[0], vars[1], one);
    for (int a = 0; a <= 4; ++a)
      for (int b = 0; a + b <= 4; ++b) CHECK(f.derivative({a, b}) == p.partial(a, b, x0, y0));
  }
}

TEST_CASE("chain rule: jet of f(g) equals composition of jets") {
  // Quartic outer, cubic inner maps with coefficients in [-1, 1]. Deviation is
  // measured on the stored Taylor coefficients; derivatives are those times alpha!.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0, worst_rel = 0.0;
  for (int trial = 0; trial < 40; ++trial) {
    const Poly2 f = random_poly(rng, 4), g1 = random_poly(rng, 3), g2 = random_poly(rng, 3);
    const std::vector<double> z0{u(rng), u(rng)};
    const auto vars = variables(z0, 4);
    const Jet one = Jet::constant(1.0, 2, 4);
    const std::vector<Jet> inner{g1(vars[0], vars[1], one), g2(vars[0], vars[1], one)};
    const Jet direct = f(inner[0], inner[1], one);
    const auto local = variables(values(inner), 4);
    const Jet outer = f(local[0], local[1], Jet::constant(1.0, 2, 4));
    const Jet composed = compose(outer, inner);
    double scale = 1.0;
    for (double v : direct.taylor()) scale = std::max(scale, std::abs(v));
    for (std::size_t m = 0; m < direct.size(); ++m) {
      const double d = std::abs(direct.taylor()[m] - composed.taylor()[m]);
      worst = std::max(worst, d);
      worst_rel = std::max(worst_rel, d / scale);
    }
  }
  CHECK(worst < 1e-12);
  CHECK(worst_rel < 1e-14);
}

TEST_CASE("mixed orders truncate and num_vars must agree") {
  const Jet a = Jet::variable(1.0, 0, 2, 4);
  const Jet b = Jet::variable(2.0, 1, 2, 2);
  CHECK((a * b).order() == 2);
  CHECK((a + b).order() == 2);
  CHECK_THROWS_AS(a + Jet::variable(1.0, 0, 1, 4), std::invalid_argument);
  CHECK_THROWS_AS(Jet::variable(0.0, 0, 1, jets::kMaxOrder + 1), JetOrderError);
}

TEST_CASE("partial derivative drops one order") {
  const auto v = variables(std::vector<double>{0.5, -0.3}, 4);
  const Jet f = sin(v[0]) * v[1] * v[1];
  const Jet fx = f.partial(0);
  CHECK(fx.order() == 3);
  CHECK(fx.value() == doctest::Approx(std::cos(0.5) * 0.09));
  CHECK(fx.derivative({1, 1}) == doctest::Approx(-std::sin(0.5) * 2 * -0.3));
}

TEST_CASE("degenerate jets reproduce point evaluation") {
  const SmoothMap m(2, 1, Box({-1, -1}, {1, 1}),
                    [](std::span<const Jet> z) { return std::vector<Jet>{exp(z[0]) * cos(z[1])}; });
  const auto c = constants(std::vector<double>{0.2, 0.4}, 2, 3);
  const auto out = m(std::span<const Jet>(c));
  CHECK(out[0].value() == std::exp(0.2) * std::cos(0.4));
  CHECK(out[0].is_constant());
  CHECK(m({0.2, 0.4})[0] == std::exp(0.2) * std::cos(0.4));
}

TEST_CASE("evaluation outside the domain box is an error") {
  const SmoothMap m(1, 1, Box::interval(0.0, 1.0), [](std::span<const Jet> z) { return std::vector<Jet>{z[0]}; });
  CHECK_THROWS_AS(m({1.5}), DomainError);
  CHECK_THROWS_AS(m.expand(std::vector<double>{-0.1}, 2), DomainError);
  CHECK_NOTHROW(m({1.0}));
}

TEST_CASE("expansion maps compose with input jets") {
  const SmoothMap inner(1, 1, Box::unbounded(1), [](std::span<const Jet> z) { return std::vector<Jet>{sin(z[0])}; });
  const SmoothMap viaexp = SmoothMap::from_expansion(
      1, 1, Box::unbounded(1),
      [inner](std::span<const double> z0, int order) { return inner.expand(z0, order); }, "sin", 0);
  const auto t = variables(std::vector<double>{0.3}, 5);
  const std::vector<Jet> sq{t[0] * t[0]};
  const Jet a = viaexp(std::span<const Jet>(sq))[0];
  const Jet b = sin(t[0] * t[0]);
  for (std::size_t m = 0; m < a.size(); ++m) CHECK(a.taylor()[m] == doctest::Approx(b.taylor()[m]).epsilon(1e-13));
}

TEST_CASE("curve derivatives in both modes") {
  const auto s = curve([](const Jet& t) { return sin(t); });
  CHECK(jets::curve_derivative(s, 1, DiffMode::jet).value[0] == doctest::Approx(1.0));
  const auto cube = curve([](const Jet& t) { return t * t * t; });
  CHECK(jets::curve_derivative(cube, 2, DiffMode::jet).value[0] == 0.0);
  const auto e2 = curve([](const Jet& t) { return exp(2.0 * t); });
  const auto jet = jets::curve_derivative(e2, 3, DiffMode::jet);
  CHECK(jet.value[0] == doctest::Approx(8.0).epsilon(1e-14));
  const auto rich = jets::curve_derivative(e2, 3, DiffMode::richardson, {0.1, 4});
  CHECK(std::abs(rich.value[0] - 8.0) < 1e-6);
  CHECK(rich.error < 1e-8 * 8.0 * 100);
  CHECK(rich.steps.size() == 4);
}

TEST_CASE("richardson agrees with jet mode within its reported error") {
  const auto c = curve([](const Jet& t) { return exp(sin(t)) * cos(0.5 * t); });
  for (int k = 1; k <= 4; ++k) {
    const auto jet = jets::curve_derivative(c, k, DiffMode::jet);
    const auto rich = jets::curve_derivative(c, k, DiffMode::richardson, {0.1, 4});
    CHECK(std::abs(jet.value[0] - rich.value[0]) <= std::max(rich.error, 1e-9) * 10);
  }
}

TEST_CASE("non-convergent extrapolation is flagged but still returns a value") {
  const auto c = curve([](const Jet& t) { return sin(40.0 * t); });
  const auto rich = jets::curve_derivative(c, 3, DiffMode::richardson, {0.5, 2});
  CHECK_FALSE(rich.converged);
  CHECK(rich.value.size() == 1);
}

TEST_CASE("mixed partials") {
  const SmoothMap ts(2, 1, Box::unbounded(2), [](std::span<const Jet> z) { return std::vector<Jet>{z[0] * z[1]}; });
  CHECK(jets::mixed_partial(ts, 1, 1, DiffMode::jet).value[0] == 1.0);
  const SmoothMap t2s(2, 1, Box::unbounded(2),
                      [](std::span<const Jet> z) { return std::vector<Jet>{z[0] * z[0] * z[1]}; });
  CHECK(jets::mixed_partial(t2s, 2, 1, DiffMode::jet).value[0] == 2.0);
  const SmoothMap ss(2, 1, Box::unbounded(2),
                     [](std::span<const Jet> z) { return std::vector<Jet>{sin(z[0]) * sin(z[1])}; });
  CHECK(jets::mixed_partial(ss, 1, 1, DiffMode::jet).value[0] == doctest::Approx(1.0).epsilon(1e-15));
  const auto rich = jets::mixed_partial(ss, 1, 1, DiffMode::richardson);
  CHECK(std::abs(rich.value[0] - 1.0) < 1e-9);
  const auto rich21 = jets::mixed_partial(t2s, 2, 1, DiffMode::richardson);
  CHECK(std::abs(rich21.value[0] - 2.0) < 1e-9);
}

TEST_CASE("expression parser") {
  const auto vars = bundle_variable_names(2);
  const auto e = Expression::parse("sqrt(y1^2 + sin(x1)^2*y2^2)", vars);
  const std::vector<double> p{1.0, 0.0, 0.3, 0.4};
  CHECK(e(p) == doctest::Approx(std::sqrt(0.09 + std::sin(1.0) * std::sin(1.0) * 0.16)));
  CHECK(Expression::parse("-2^2", vars)(p) == -4.0);
  CHECK(Expression::parse("2^3^2", vars)(p) == 512.0);
  CHECK(Expression::parse("(x1 - 3)^2", vars)(p) == 4.0);
  CHECK(Expression::parse("x2^(-1+0)", {"x1", "x2"})(std::vector<double>{1.0, 4.0}) == 0.25);
  CHECK(Expression::parse("exp(log(2)) + pi - pi", vars)(p) == doctest::Approx(2.0));
  CHECK(Expression::parse("1e-3*2", vars)(p) == doctest::Approx(0.002));
  CHECK_THROWS_AS(Expression::parse("x3", vars), ParseError);
  CHECK_THROWS_AS(Expression::parse("sin x1", vars), ParseError);
  CHECK_THROWS_AS(Expression::parse("(x1", vars), ParseError);
  CHECK_THROWS_AS(Expression::parse("x1 +", vars), ParseError);
  CHECK_THROWS_AS(Expression::parse("x1 x2", vars), ParseError);

  const auto jv = variables(p, 3);
  const Jet j = Expression::parse("(x1 - 3)^3 * y2", vars)(jv);
  CHECK(j.derivative({1, 0, 0, 1}) == doctest::Approx(12.0));

  const auto m = expression_map({"x1*y1", "x2"}, vars, Box::unbounded(4));
  CHECK(m.codomain_dim() == 2);
  CHECK(m(p)[0] == doctest::Approx(0.3));
}
