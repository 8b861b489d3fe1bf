#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "finslab/curvature.hpp"
#include "finslab/expression.hpp"
#include "finslab/transport.hpp"
#include "support.hpp"

using namespace finslab;
using namespace finslab::testing;

namespace {

const double pi = std::numbers::pi;

}  // namespace

TEST_CASE("euclidean transport is the identity") {
  const auto F = catalog::euclidean(3);
  std::mt19937_64 rng(1);
  for (int k = 0; k < 5; ++k) {
    const auto c = random_curve(F, rng);
    const std::vector<double> y{0.3, -1.2, 2.0};
    const auto r = parallel_transport(F, c, y);
    for (int i = 0; i < 3; ++i) CHECK(r.y_end[i] == y[i]);
    CHECK(r.norm_drift == 0.0);
    CHECK_FALSE(r.flagged);
  }
}

TEST_CASE("norm preservation and homogeneity") {
  std::mt19937_64 rng(2);
  for (const auto& F : catalog_all()) {
    CAPTURE(F.name());
    for (int k = 0; k < 3; ++k) {
      const auto c = random_curve(F, rng);
      std::vector<double> y0(F.dim());
      for (auto& v : y0) v = std::normal_distribution<double>()(rng);
      const auto r = parallel_transport(F, c, y0);
      const double f0 = F(c.start(), y0);
      CHECK(r.norm_drift < 1e-8 * f0);
      CHECK_FALSE(r.flagged);
      CHECK(r.stats.accepted > 0);
      for (double lam : {0.5, 2.0, 10.0}) {
        std::vector<double> ly(y0);
        for (auto& v : ly) v *= lam;
        const auto rl = parallel_transport(F, c, ly);
        for (int i = 0; i < F.dim(); ++i)
          CHECK(std::abs(rl.y_end[i] - lam * r.y_end[i]) < 1e-8 * lam * norm(r.y_end));
      }
    }
  }
}

TEST_CASE("composition and reversal") {
  std::mt19937_64 rng(3);
  for (const auto& F : {catalog::sphere(), catalog::funk()}) {
    const auto p = random_point(F, rng);
    const auto q = random_point(F, rng), r = random_point(F, rng);
    const auto loop1 = presets::polygon({p, q, r});
    const auto loop3 = presets::polygon({p, r, random_point(F, rng)});
    const auto samples = indicatrix_samples(F, p, 6);
    const auto h1 = holonomy_map(F, loop1, samples);
    const auto both = holonomy_map(F, loop1.concatenated(loop3), samples);
    for (std::size_t k = 0; k < samples.size(); ++k) {
      // the intermediate vector is only on the indicatrix up to integrator drift
      const auto h13 = parallel_transport(F, loop3.curve(), h1[k].y_end);
      CHECK(dist(both[k].y_end, h13.y_end) < 1e-7);
    }
    const auto back = holonomy_map(F, loop1.concatenated(loop1.reversed()), samples);
    for (std::size_t k = 0; k < samples.size(); ++k) CHECK(dist(back[k].y_end, samples[k]) < 1e-7);
    for (const auto& t : h1) CHECK(std::abs(F(p, t.y_end) - 1.0) < 1e-8);
  }
}

TEST_CASE("holonomy preconditions") {
  const auto F = catalog::sphere();
  const std::vector<double> p{1.0, 0.0};
  const auto loop = presets::constant(p);
  const auto id = holonomy_map(F, loop, indicatrix_samples(F, p, 5));
  const auto samples = indicatrix_samples(F, p, 5);
  for (std::size_t k = 0; k < samples.size(); ++k) CHECK(id[k].y_end == samples[k]);
  CHECK_THROWS_AS(holonomy_map(F, loop, {{2.0, 0.0}}), std::invalid_argument);
  CHECK_THROWS_AS(parallel_transport(F, presets::polyline({{1.0, 0.0}, {5.0, 0.0}}), std::vector<double>{1.0, 0.0}),
                  std::exception);
  CHECK_THROWS_AS(LoopSpec(presets::polyline({{1.0, 0.0}, {1.2, 0.0}})), std::invalid_argument);
}

TEST_CASE("Gauss-Bonnet rotation on the sphere") {
  const auto F = catalog::sphere();
  const double t1 = pi / 3, t2 = pi / 2;
  const auto loop = presets::rectangle({t1, 0.0}, 0, 1, t1, t2, 0.0, 1.0);
  const std::vector<double> p{t1, 0.0};
  const auto samples = indicatrix_samples(F, p, 8);
  const auto h = holonomy_map(F, loop, samples);
  const double expected = 1.0 * (std::cos(t1) - std::cos(t2));
  for (std::size_t k = 0; k < samples.size(); ++k) {
    CHECK(rotation_angle(F, p, samples[k], h[k].y_end) == doctest::Approx(expected).epsilon(1e-6));
    CHECK(h[k].norm_drift < 1e-8);
  }
}

TEST_CASE("parallelogram loops") {
  const auto F = catalog::sphere();
  const std::vector<double> p{1.2, 0.1};
  const auto X = coordinate_field(2, 0);
  const auto Y = expression_map({"0.3*x2", "1 + 0.2*x1"}, {"x1", "x2"}, Box::unbounded(2));
  const auto L = make_parallelogram(F.manifold(), X, Y, p, 0.1);
  CHECK(L.loop.curve().start() == L.loop.curve().end());
  CHECK(L.closure_mismatch < 1e-9);
  CHECK(L.corners.size() == 5);
  const auto samples = indicatrix_samples(F, p, 4);
  const auto h0 = parallelogram_holonomy(F, X, Y, p, 0.0, samples);
  CHECK(h0.images == samples);
  // beta closes the gap between alpha's endpoint and p, so the loop has small holonomy
  const auto h = parallelogram_holonomy(F, X, Y, p, 0.05, samples);
  for (std::size_t k = 0; k < samples.size(); ++k) CHECK(dist(h.images[k], samples[k]) < 1e-2);
}

TEST_CASE("flow escape reports the admissible scale") {
  const auto F = catalog::sphere();
  const std::vector<double> p{0.5, 0.0};
  const auto X = coordinate_field(2, 0);
  try {
    (void)make_parallelogram(F.manifold(), X, coordinate_field(2, 1), p, -0.5);
    FAIL("expected FlowEscapeError");
  } catch (const FlowEscapeError& e) {
    CHECK(e.max_admissible_t() == doctest::Approx(0.3).epsilon(1e-4));
  }
}

TEST_CASE("holonomy derivatives match curvature") {
  std::mt19937_64 rng(4);
  for (const auto& F : {catalog::sphere(), catalog::funk()}) {
    CAPTURE(F.name());
    const auto p = F.name() == "sphere" ? std::vector<double>{1.3, 0.2} : std::vector<double>{0.2, -0.1};
    const auto X = expression_map({"1 + 0.2*x2", "0.1*x1"}, {"x1", "x2"}, Box::unbounded(2));
    const auto Y = expression_map({"0.2*x1*x2", "1"}, {"x1", "x2"}, Box::unbounded(2));
    const auto xi = curvature_field(F, X, Y, p);
    const auto samples = indicatrix_samples(F, p, 2, 0.1);
    const auto d = parallelogram_derivatives(F, X, Y, p, samples);
    for (std::size_t k = 0; k < samples.size(); ++k) {
      const auto v = xi.at(samples[k]);
      CHECK(dist({0.5 * d.second[k][0], 0.5 * d.second[k][1]}, v) < 1e-4 * norm(v));
      CHECK(norm(d.first[k]) < 1e-6 * norm(v));
    }
  }
}

TEST_CASE("flow and transport agree") {
  const auto S = catalog::sphere();
  CHECK(flow_transport_discrepancy(S, SmoothMap::zero(2, 2, Box::unbounded(2)), std::vector<double>{1.0, 0.0},
                                   std::vector<double>{0.3, 0.4}, 0.5) == 0.0);
  const auto E = catalog::euclidean(2);
  CHECK(flow_transport_discrepancy(E, SmoothMap::constant({0.4, -0.3}, 2, Box::unbounded(2)),
                                   std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, 2.0}, 1.0) < 1e-10);
  CHECK(flow_transport_discrepancy(S, coordinate_field(2, 1), std::vector<double>{1.0, 0.0},
                                   std::vector<double>{0.6, 0.8}, 0.5) < 1e-7);
  const auto Fk = catalog::funk();
  const auto X = expression_map({"0.3 - 0.5*x2", "0.2 + x1"}, {"x1", "x2"}, Box::unbounded(2));
  CHECK(flow_transport_discrepancy(Fk, X, std::vector<double>{0.1, 0.1}, std::vector<double>{1.0, -0.5}, 0.4) < 1e-7);
}

TEST_CASE("fibered holonomy family") {
  const auto F = catalog::sphere();
  const auto X = coordinate_field(2, 0), Y = coordinate_field(2, 1);
  const std::vector<double> p{1.1, 0.3};
  const auto single = fibered_holonomy_family(F, X, Y, {p}, 0.05, 4);
  REQUIRE(single.size() == 1);
  REQUIRE(single[0].holonomy);
  const auto direct = parallelogram_holonomy(F, X, Y, p, 0.05, indicatrix_samples(F, p, 4));
  CHECK(single[0].holonomy->images == direct.images);

  std::vector<std::vector<double>> grid;
  for (double th : {1.0, 1.3, 1.6})
    for (double ph : {-0.5, 0.0, 0.5}) grid.push_back({th, ph});
  const auto id = fibered_holonomy_family(F, X, Y, grid, 0.0, 3);
  for (const auto& r : id) CHECK(r.holonomy->images == indicatrix_samples(F, r.p, 3));

  // second derivative per fiber against the curvature field
  const std::vector<double> hs{0.08, 0.04, 0.02, 0.01};
  std::vector<std::vector<FiberResult>> plus, minus;
  for (double h : hs) {
    plus.push_back(fibered_holonomy_family(F, X, Y, grid, h, 2));
    minus.push_back(fibered_holonomy_family(F, X, Y, grid, -h, 2));
  }
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto samples = indicatrix_samples(F, grid[g], 2);
    const auto xi = curvature_field(F, X, Y, grid[g]);
    for (std::size_t s = 0; s < samples.size(); ++s) {
      std::vector<jets::StepRecord> rec;
      for (std::size_t l = 0; l < hs.size(); ++l) {
        std::vector<double> q(2);
        for (int i = 0; i < 2; ++i)
          q[i] = (plus[l][g].holonomy->images[s][i] - 2 * samples[s][i] + minus[l][g].holonomy->images[s][i]) /
                 (hs[l] * hs[l]);
        rec.push_back({hs[l], q});
      }
      const auto d2 = jets::richardson_extrapolate(rec, 2, 2).value;
      const auto v = xi.at(samples[s]);
      CHECK(dist({0.5 * d2[0], 0.5 * d2[1]}, v) < 1e-4 * norm(v));
    }
  }
  // failures are collected per fiber
  const auto bad = fibered_holonomy_family(F, X, Y, {{0.25, 0.0}, p}, -0.2, 2);
  CHECK_FALSE(bad[0].error.empty());
  CHECK_FALSE(bad[0].holonomy);
  CHECK(bad[1].error.empty());
}
