// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Tolerances and runtime limits are pinned below.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <future>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "finslab/curvature.hpp"
#include "finslab/expression.hpp"
#include "finslab/grouplab.hpp"
#include "finslab/inclusion_chain.hpp"
#include "finslab/liealg.hpp"
#include "finslab/transport.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace finslab;
using namespace finslab::testing;
using namespace finslab::grouplab;
using Eigen::MatrixXd;

namespace {

namespace tol {
constexpr double commutator = 1e-9;
constexpr double sum_relative = 1e-8;
constexpr double scale = 1e-9;
constexpr double ratio_lo = 1.8, ratio_hi = 2.2;
constexpr double unitriangular = 1e-9;
constexpr double transport_norm = 1e-8;
constexpr double transport_homogeneity = 1e-8;
constexpr double gauss_bonnet = 1e-6;
constexpr double second_derivative = 1e-4;
constexpr double first_derivative = 1e-6;
// Relative errors are taken against max(|xi|, floor): flat metrics have xi = 0 exactly.
constexpr double curvature_floor = 1e-3;
constexpr double flow_transport = 1e-7;
constexpr double abelian_bracket = 1e-7;
constexpr double algebra = 1e-10;
}  // namespace tol

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  double limit_s;  // 0: no runtime limit
  std::function<Outcome()> run;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

const nlohmann::json& fixture() {
  static const nlohmann::json j = [] {
    std::ifstream in(std::string(FINSLAB_TEST_DATA) + "/grouplab.json");
    return nlohmann::json::parse(in);
  }();
  return j;
}

MatrixXd mat(const nlohmann::json& rows) {
  const int n = static_cast<int>(rows.size());
  MatrixXd A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = rows[i][j].get<double>();
  return A;
}

MatrixXd E(int n, int i, int j) {
  MatrixXd A = MatrixXd::Zero(n, n);
  A(i, j) = 1.0;
  return A;
}

double maxabs(const MatrixXd& A) { return A.size() ? A.cwiseAbs().maxCoeff() : 0.0; }

MatrixXd random_matrix(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  MatrixXd A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = u(rng);
  return A;
}

double factorial(int k) { return k <= 1 ? 1.0 : k * factorial(k - 1); }

// ---------------------------------------------------------------------------

Outcome commutator_mixed_derivative() {
  const auto& f = fixture()["commutator"];
  const MatrixXd X = E(2, 0, 1), Y = E(2, 1, 0);
  const auto phi = exp_curve(X), psi = exp_curve(Y);
  const MatrixXd mixed = commutator_family(phi, psi).mixed_derivative(1, 1);
  const double err = std::max(maxabs(mixed - (Y * X - X * Y)), maxabs(mixed - mat(f["mixed_1_1"])));

  const auto diag = order_of_contact(commutator_curve(phi, psi), 6);
  Outcome o;
  o.pass = err < tol::commutator && diag.order && *diag.order == 2;
  double factor = 0.0, residual = 0.0;
  if (diag.order) {
    factor = (diag.direction.array() * mixed.array()).sum() / mixed.squaredNorm();
    residual = maxabs(diag.direction - factor * mixed);
    const double expect = f["diagonal_factor"]["1,1"].get<double>();
    o.pass = o.pass && residual < tol::commutator && std::abs(factor - expect) < tol::commutator;
  }
  o.detail = "mixed err " + fmt(err) + ", diagonal order " + (diag.order ? std::to_string(*diag.order) : "none") +
             ", factor " + fmt(factor) + " (residual " + fmt(residual) + ")";
  return o;
}

Outcome sum_direction() {
  std::mt19937_64 rng(102);
  Outcome o;
  double worst = 0.0, alternate_equal = 0.0, alternate_mixed = INFINITY;
  for (auto [k, l] : {std::pair{1, 1}, {1, 2}, {2, 2}, {2, 3}}) {
    const int r = std::lcm(k, l);
    for (int trial = 0; trial < 5; ++trial) {
      const MatrixXd A = random_matrix(2, rng), B = random_matrix(2, rng);
      const auto phi = exp_curve(A, k), psi = exp_curve(B, l);
      const MatrixXd target = factorial(k) * A + factorial(l) * B;
      const auto d = order_of_contact(sum_curve(phi, psi), r + 2);
      if (!d.order || *d.order != r) {
        o.pass = false;
        continue;
      }
      const double rel = maxabs(d.direction - target) / maxabs(target);
      worst = std::max(worst, rel);
      const auto p = order_of_contact(sum_curve(phi, psi, SumConstants::alternate), r + 2);
      const double prel = p.order && *p.order == r ? maxabs(p.direction - target) / maxabs(target) : INFINITY;
      if (k == l)
        alternate_equal = std::max(alternate_equal, prel);
      else
        alternate_mixed = std::min(alternate_mixed, prel);
    }
  }
  o.pass = o.pass && worst < tol::sum_relative;
  o.detail = "derived max rel " + fmt(worst) + "; alternate constants: k=l max rel " + fmt(alternate_equal) +
             ", k!=l min rel " + fmt(alternate_mixed) + " (documented mismatch)";
  return o;
}

Outcome scale_and_inverse() {
  std::mt19937_64 rng(103);
  double worst_scale = 0.0, worst_inverse = 0.0;
  bool orders = true;
  for (int k = 1; k <= 3; ++k)
    for (int trial = 0; trial < 3; ++trial) {
      const MatrixXd A = random_matrix(2, rng);
      const auto phi = exp_curve(A, k);
      const MatrixXd X = factorial(k) * A;
      for (double lambda : {-2.0, -1.0, 0.5, 3.0}) {
        const auto d = order_of_contact(scale_curve(phi, lambda), k + 1);
        if (!d.order || *d.order != k) {
          orders = false;
          continue;
        }
        worst_scale = std::max(worst_scale, maxabs(d.direction - lambda * X));
      }
      const auto inv = order_of_contact(inverse_curve(phi), k + 1);
      if (!inv.order || *inv.order != k) {
        orders = false;
        continue;
      }
      worst_inverse = std::max(worst_inverse, maxabs(inv.direction + X));
    }
  return {orders && worst_scale < tol::scale && worst_inverse < tol::scale,
          "scale max err " + fmt(worst_scale) + ", inverse max err " + fmt(worst_inverse) +
              (orders ? "" : ", contact order wrong")};
}

Outcome exp_iterate_rate() {
  const auto& f = fixture()["exp_iterate"];
  std::vector<std::pair<MatrixXd, MatrixXd>> cases{{mat(f["X"]), mat(f["M"])}};
  std::mt19937_64 rng(104);
  for (int trial = 0; trial < 9; ++trial) {
    MatrixXd X = random_matrix(2, rng), M = random_matrix(2, rng);
    X /= std::max(1.0, X.operatorNorm());
    M /= std::max(1.0, M.operatorNorm());
    cases.emplace_back(X, M);
  }
  double lo = INFINITY, hi = 0.0;
  bool reference = true;
  for (const auto& [X, M] : cases) {
    const auto psi = polynomial_curve({X, M});
    std::vector<double> d;
    for (int n : {64, 128, 256}) {
      const auto it = exp_iterate(psi, 1.0, n);
      // independent reference: Eigen's matrix exponential and a plain power loop
      const MatrixXd ref = X.exp();
      const MatrixXd step = MatrixXd::Identity(2, 2) + X / n + M / double(n) / double(n);
      MatrixXd pw = MatrixXd::Identity(2, 2);
      for (int j = 0; j < n; ++j) pw = pw * step;
      reference = reference && maxabs(it.exponential - ref) < 1e-12 && maxabs(it.power - pw) < 1e-12;
      d.push_back(maxabs(pw - ref));
    }
    for (std::size_t j = 1; j < d.size(); ++j) {
      lo = std::min(lo, d[j - 1] / d[j]);
      hi = std::max(hi, d[j - 1] / d[j]);
    }
  }
  return {reference && lo >= tol::ratio_lo && hi <= tol::ratio_hi,
          "ratios in [" + fmt(lo) + ", " + fmt(hi) + "] over " + std::to_string(cases.size()) + " cases" +
              (reference ? "" : ", reference mismatch")};
}

Outcome unitriangular_closure() {
  std::mt19937_64 rng(105);
  std::uniform_real_distribution<double> lam(-3.0, 3.0);
  std::uniform_int_distribution<int> op(0, 2), ord(1, 2);
  auto upper = [&] {
    MatrixXd A = random_matrix(3, rng);
    return MatrixXd(A.triangularView<Eigen::StrictlyUpper>());
  };
  // Pool of (curve, order); results of short order re-enter it so operations nest.
  std::vector<std::pair<MatrixCurve, int>> pool;
  for (int i = 0; i < 6; ++i) {
    const int k = ord(rng);
    pool.emplace_back(exp_curve(upper(), k), k);
  }
  double worst = 0.0;
  int applied = 0, trivial = 0, nested = 0;
  for (int trial = 0; trial < 500; ++trial) {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    const auto& [a, ka] = pool[pick(rng)];
    const auto& [b, kb] = pool[pick(rng)];
    MatrixCurve c;
    int expect_max = 0;
    switch (op(rng)) {
      case 0: c = commutator_curve(a, b); expect_max = ka + kb + 4; break;
      case 1: c = sum_curve(a, b); expect_max = std::lcm(ka, kb) + 2; break;
      default: c = scale_curve(a, lam(rng)); expect_max = ka + 2; break;
    }
    const auto r = order_of_contact(c, std::min(expect_max, 12));
    ++applied;
    if (!r.order) {
      ++trivial;
      continue;
    }
    worst = std::max(worst, maxabs(MatrixXd(r.direction.triangularView<Eigen::Lower>())));
    if (*r.order <= 3 && pool.size() < 40) {
      pool.emplace_back(c, *r.order);
      ++nested;
    }
  }
  return {worst < tol::unitriangular, std::to_string(applied) + " operations (" + std::to_string(nested) +
                                          " nested results, " + std::to_string(trivial) +
                                          " without contact), lower+diagonal max " + fmt(worst)};
}

Outcome transport_contracts() {
  const auto metrics = catalog_all();
  std::vector<std::future<std::pair<double, double>>> jobs;
  for (std::size_t m = 0; m < metrics.size(); ++m)
    jobs.push_back(std::async(std::launch::async, [&F = metrics[m], m] {
      std::mt19937_64 rng(106 + m);
      double drift = 0.0, homog = 0.0;
      for (int k = 0; k < 20; ++k) {
        const auto c = random_curve(F, rng);
        std::vector<double> y0(F.dim());
        for (auto& v : y0) v = std::normal_distribution<double>()(rng);
        const auto r = parallel_transport(F, c, y0);
        drift = std::max(drift, r.norm_drift / F(c.start(), y0));
        for (double lam : {0.5, 2.0, 10.0}) {
          std::vector<double> ly(y0);
          for (auto& v : ly) v *= lam;
          const auto rl = parallel_transport(F, c, ly);
          std::vector<double> scaled(r.y_end);
          for (auto& v : scaled) v *= lam;
          homog = std::max(homog, dist(rl.y_end, scaled) / norm(scaled));
        }
      }
      return std::pair{drift, homog};
    }));
  double drift = 0.0, homog = 0.0;
  for (auto& j : jobs) {
    const auto [d, h] = j.get();
    drift = std::max(drift, d);
    homog = std::max(homog, h);
  }
  return {drift < tol::transport_norm && homog < tol::transport_homogeneity,
          std::to_string(metrics.size()) + " metrics x 20 curves: relative norm drift " + fmt(drift) +
              ", homogeneity " + fmt(homog)};
}

Outcome gauss_bonnet() {
  const auto F = catalog::sphere();
  const double t1 = std::numbers::pi / 3, t2 = std::numbers::pi / 2;
  const auto loop = presets::rectangle({t1, 0.0}, 0, 1, t1, t2, 0.0, 1.0);
  const std::vector<double> p{t1, 0.0};
  const auto samples = indicatrix_samples(F, p, 8);
  const auto h = holonomy_map(F, loop, samples);
  const double expected = 1.0 * (std::cos(t1) - std::cos(t2));
  double worst = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k)
    worst = std::max(worst, std::abs(rotation_angle(F, p, samples[k], h[k].y_end) - expected));
  return {worst < tol::gauss_bonnet, "8 samples, angle " + fmt(expected) + " rad, max err " + fmt(worst)};
}

// Field a + B (x - p) + c (x - p)^2 (componentwise square), centered at p.
SmoothMap random_field(const std::vector<double>& p, std::mt19937_64& rng) {
  const int n = static_cast<int>(p.size());
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::string> comp;
  const auto vars = base_variable_names(n);
  for (int i = 0; i < n; ++i) {
    std::ostringstream os;
    os.precision(17);
    os << u(rng);
    for (int j = 0; j < n; ++j) os << " + (" << 0.3 * u(rng) << ")*(" << vars[j] << " - (" << p[j] << "))";
    os << " + (" << 0.2 * u(rng) << ")*(" << vars[i] << " - (" << p[i] << "))^2";
    comp.push_back(os.str());
  }
  return expression_map(comp, vars, Box::unbounded(n));
}

Outcome holonomy_derivatives() {
  const auto metrics = catalog_all();
  struct Partial {
    double second = 0.0, first = 0.0;
    std::string error;
  };
  std::vector<std::future<Partial>> jobs;
  for (std::size_t m = 0; m < metrics.size(); ++m)
    jobs.push_back(std::async(std::launch::async, [&F = metrics[m], m] {
      Partial out;
      std::mt19937_64 rng(108 + m);
      for (int k = 0; k < 10; ++k) {
        const auto p = random_point(F, rng, 0.3);
        const auto X = random_field(p, rng), Y = random_field(p, rng);
        try {
          const auto xi = curvature_field(F, X, Y, p);
          const auto samples = indicatrix_samples(F, p, 2, 0.1);
          const auto d = parallelogram_derivatives(F, X, Y, p, samples);
          for (std::size_t s = 0; s < samples.size(); ++s) {
            const auto v = xi.at(samples[s]);
            const double scale = std::max(norm(v), tol::curvature_floor);
            std::vector<double> half(d.second[s]);
            for (auto& c : half) c *= 0.5;
            out.second = std::max(out.second, dist(half, v) / scale);
            out.first = std::max(out.first, norm(d.first[s]) / scale);
          }
        } catch (const std::exception& e) {
          out.error = F.name() + ": " + e.what();
        }
      }
      return out;
    }));
  Outcome o;
  double second = 0.0, first = 0.0;
  std::string errors;
  for (auto& j : jobs) {
    const auto r = j.get();
    second = std::max(second, r.second);
    first = std::max(first, r.first);
    if (!r.error.empty()) errors += "; " + r.error;
  }
  o.pass = errors.empty() && second < tol::second_derivative && first < tol::first_derivative;
  o.detail = std::to_string(metrics.size()) + " metrics x 10 cases: second-derivative rel " + fmt(second) +
             ", first-derivative rel " + fmt(first) + errors;
  return o;
}

Outcome flow_and_transport() {
  const auto metrics = catalog_all();
  std::vector<std::future<double>> jobs;
  for (std::size_t m = 0; m < metrics.size(); ++m)
    jobs.push_back(std::async(std::launch::async, [&F = metrics[m], m] {
      std::mt19937_64 rng(109 + m);
      const double t = F.name() == "funk" ? 0.15 : 0.3;
      double worst = 0.0;
      for (int k = 0; k < 20; ++k) {
        const auto p = random_point(F, rng, 0.3);
        const auto X = random_field(p, rng);
        std::vector<double> y0(F.dim());
        for (auto& v : y0) v = std::normal_distribution<double>()(rng);
        worst = std::max(worst, flow_transport_discrepancy(F, X, p, y0, t));
      }
      return worst;
    }));
  double worst = 0.0;
  for (auto& j : jobs) worst = std::max(worst, j.get());
  return {worst < tol::flow_transport,
          std::to_string(metrics.size()) + " metrics x 20 triples: max discrepancy " + fmt(worst)};
}

Outcome inclusion_chain() {
  Outcome o;
  std::ostringstream os;
  for (const auto& key : catalog::names()) {
    const auto F = catalog::by_name(key);
    InclusionChainReport r;
    if (key == "sphere") {
      auto fields = coordinate_fields(2);
      fields.push_back({"V", expression_map({"x2", "1 + x1*x1"}, {"x1", "x2"}, Box::unbounded(2))});
      r = inclusion_chain_report(F, std::vector<double>{1.1, -0.4}, 2, fields);
      o.pass = o.pass && r.rank_curvature == 1 && r.rank_ihol == 1 && r.max_curvature_bracket < tol::abelian_bracket;
    } else if (key == "funk") {
      r = inclusion_chain_report(F, std::vector<double>{0.3, 0.0});
    } else {
      std::vector<double> p(F.dim());
      for (int i = 0; i < F.dim(); ++i)
        p[i] = 0.5 * (F.manifold().chart.lo[i] + F.manifold().chart.hi[i]) + 0.1 * (i + 1);
      r = inclusion_chain_report(F, p);
      o.pass = o.pass && r.rank_curvature == 0 && r.rank_ihol == 0;
    }
    o.pass = o.pass && r.ordered();
    os << key << " (" << r.rank_curvature << ", " << r.rank_ihol << ")";
    if (key == "sphere") os << " bracket " << fmt(r.max_curvature_bracket);
    if (key == "funk") os << " stabilized " << (r.ihol.closure.rank.stabilized ? "yes" : "no");
    if (key != catalog::names().back()) os << ", ";
  }
  o.detail = os.str();
  return o;
}

// Random affine field on R^2; brackets of these stay in aff(2), so closures terminate.
SmoothMap random_affine(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> c(6);
  for (auto& v : c) v = u(rng);
  return SmoothMap(
      2, 2, Box::unbounded(2),
      [c](std::span<const Jet> z) {
        return std::vector<Jet>{c[0] + c[1] * z[0] + c[2] * z[1], c[3] + c[4] * z[0] + c[5] * z[1]};
      },
      "affine");
}

Outcome algebra_suite() {
  std::mt19937_64 rng(111);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double antisym = 0.0, jacobi = 0.0, idem = 0.0;
  int failures = 0;
  for (int k = 0; k < 250; ++k) {
    const auto X = random_poly_field(3, 3, rng), Y = random_poly_field(3, 3, rng);
    const auto p = random_points(3, 1, rng)[0];
    const auto xy = lie_bracket(X, Y)(p), yx = lie_bracket(Y, X)(p);
    double s = 1.0, e = 0.0;
    for (std::size_t i = 0; i < xy.size(); ++i) {
      s = std::max(s, std::abs(xy[i]));
      e = std::max(e, std::abs(xy[i] + yx[i]));
    }
    antisym = std::max(antisym, e / s);
  }
  for (int k = 0; k < 250; ++k) {
    const auto X = random_poly_field(3, 3, rng), Y = random_poly_field(3, 3, rng), Z = random_poly_field(3, 3, rng);
    const auto p = random_points(3, 1, rng)[0];
    const auto a = lie_bracket(X, lie_bracket(Y, Z))(p);
    const auto b = lie_bracket(Y, lie_bracket(Z, X))(p);
    const auto c = lie_bracket(Z, lie_bracket(X, Y))(p);
    double s = 1.0, e = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      s = std::max({s, std::abs(a[i]), std::abs(b[i]), std::abs(c[i])});
      e = std::max(e, std::abs(a[i] + b[i] + c[i]));
    }
    jacobi = std::max(jacobi, e / s);
  }
  for (int k = 0; k < 250; ++k) {
    ClosureOptions opt;
    opt.points = random_points(2, 12, rng);
    opt.depth = 6;
    opt.parallel = false;
    const auto first = lie_closure({random_affine(rng), random_affine(rng)}, {"A", "B"}, opt);
    const auto again = lie_closure(first.span.fields, first.span.labels, opt);
    if (first.trace.termination != ClosureTrace::Termination::rank_stable || again.rank.rank != first.rank.rank ||
        again.span.labels != first.span.labels)
      ++failures;
    // row space of the re-closure against the first closure, on the doubled sample
    const auto pts = doubled_sample(opt.points);
    const MatrixXd A = first.span.evaluation_matrix(pts), B = again.span.evaluation_matrix(pts);
    const Eigen::ColPivHouseholderQR<MatrixXd> qr(A.transpose());
    const MatrixXd coef = qr.solve(B.transpose());
    idem = std::max(idem, maxabs(A.transpose() * coef - B.transpose()) / std::max(1.0, maxabs(B)));
  }
  for (int k = 0; k < 250; ++k) {
    std::vector<SmoothMap> fs;
    for (int i = 0; i < 4; ++i) fs.push_back(random_poly_field(2, 2, rng));
    fs.push_back(sum_fields({fs[0], fs[1]}, {u(rng), u(rng)}));  // dependent
    const auto pts = random_points(2, 10, rng);
    int prev = 0;
    bool monotone = true;
    for (std::size_t n = 1; n <= fs.size(); ++n) {
      const int r = numerical_rank(std::vector<SmoothMap>(fs.begin(), fs.begin() + n), pts).rank;
      monotone = monotone && r >= prev;
      prev = r;
    }
    if (!monotone || prev != 4) ++failures;
  }
  return {failures == 0 && antisym < tol::algebra && jacobi < tol::algebra && idem < tol::algebra,
          "1000 cases: antisymmetry " + fmt(antisym) + ", Jacobi " + fmt(jacobi) + ", idempotence residual " +
              fmt(idem) + ", structural failures " + std::to_string(failures)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "commutator mixed derivative and diagonal factor", 1.0, commutator_mixed_derivative},
      {2, "sum curve direction", 5.0, sum_direction},
      {3, "scalar multiple and inverse", 0.0, scale_and_inverse},
      {4, "exponential iterate convergence rate", 1.0, exp_iterate_rate},
      {5, "unitriangular closure", 0.0, unitriangular_closure},
      {6, "transport norm and homogeneity", 30.0, transport_contracts},
      {7, "sphere rectangle rotation", 10.0, gauss_bonnet},
      {8, "holonomy derivatives against curvature", 120.0, holonomy_derivatives},
      {9, "flow of horizontal lift equals transport", 0.0, flow_and_transport},
      {10, "inclusion chain ranks", 0.0, inclusion_chain},
      {11, "Lie algebra identities", 30.0, algebra_suite},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.limit_s == 0.0 || secs < c.limit_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("criterion %2d %s  %s: %s [%.2f s%s]\n", c.id, pass ? "PASS" : "FAIL", c.title.c_str(),
                o.detail.c_str(), secs,
                c.limit_s == 0.0 ? "" : (" / limit " + fmt(c.limit_s) + " s" + (in_time ? "" : " EXCEEDED")).c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
