#pragma once

// Random fields, points and curves shared by the unit tests and the acceptance binary.

#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "finslab/finsler.hpp"
#include "finslab/smooth_map.hpp"
#include "finslab/transport.hpp"

namespace finslab::testing {

inline double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Random polynomial field on R^m: five monomials of total degree <= deg per component.
inline SmoothMap random_poly_field(int m, int deg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> e(0, deg);
  struct Term {
    double c;
    std::vector<int> alpha;
  };
  std::vector<std::vector<Term>> comps(m);
  for (auto& comp : comps)
    for (int k = 0; k < 5; ++k) {
      Term t{u(rng), std::vector<int>(m, 0)};
      int budget = e(rng);
      for (int i = 0; i < m && budget > 0; ++i) {
        std::uniform_int_distribution<int> take(0, budget);
        t.alpha[i] = take(rng);
        budget -= t.alpha[i];
      }
      comp.push_back(t);
    }
  auto eval = [comps, m](std::span<const Jet> z) {
    std::vector<Jet> out;
    for (const auto& comp : comps) {
      Jet acc = Jet::constant(0.0, z[0].num_vars(), z[0].order());
      for (const auto& t : comp) {
        Jet mono = Jet::constant(t.c, z[0].num_vars(), z[0].order());
        for (int i = 0; i < m; ++i)
          for (int p = 0; p < t.alpha[i]; ++p) mono *= z[i];
        acc += mono;
      }
      out.push_back(acc);
    }
    return out;
  };
  return SmoothMap(m, m, Box::unbounded(m), eval, "poly");
}

// Uniform in [-1, 1]^m.
inline std::vector<std::vector<double>> random_points(int m, int count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::vector<double>> pts(count, std::vector<double>(m));
  for (auto& p : pts)
    for (auto& v : p) v = u(rng);
  return pts;
}

inline SmoothMap sum_fields(const std::vector<SmoothMap>& fs, const std::vector<double>& w) {
  const int m = fs[0].domain_dim();
  auto eval = [fs, w, m](std::span<const Jet> z) {
    std::vector<Jet> out;
    for (std::size_t k = 0; k < fs.size(); ++k) {
      const auto v = fs[k](z);
      for (int i = 0; i < m; ++i) {
        if (k == 0)
          out.push_back(w[k] * v[i]);
        else
          out[i] += w[k] * v[i];
      }
    }
    return out;
  };
  return SmoothMap(m, m, fs[0].domain(), eval, "combination");
}

// Uniform in the chart box shrunk by margin * side on every face.
inline std::vector<double> random_point(const FinslerNorm& F, std::mt19937_64& rng, double margin = 0.15) {
  std::vector<double> p;
  for (int i = 0; i < F.dim(); ++i) {
    const double lo = F.manifold().chart.lo[i], hi = F.manifold().chart.hi[i];
    const double m = margin * (hi - lo);
    p.push_back(std::uniform_real_distribution<double>(lo + m, hi - m)(rng));
  }
  return p;
}

// Smooth random curve: a polyline through three random points, bent by a sine.
inline CurveSpec random_curve(const FinslerNorm& F, std::mt19937_64& rng) {
  const auto a = random_point(F, rng), b = random_point(F, rng);
  std::vector<std::string> comp;
  for (int i = 0; i < F.dim(); ++i) {
    std::ostringstream os;
    os.precision(17);
    os << a[i] << " + (" << (b[i] - a[i]) << ")*t + 0.05*sin(3*t + " << i << ")*t*(1-t)";
    comp.push_back(os.str());
  }
  return presets::from_expressions({comp}).concatenated(presets::polyline({b, random_point(F, rng)}));
}

inline std::vector<FinslerNorm> catalog_all() {
  std::vector<FinslerNorm> out;
  for (const auto& key : catalog::names()) out.push_back(catalog::by_name(key));
  return out;
}

}  // namespace finslab::testing
