#include "finslab/derivatives.hpp"

#include <algorithm>
#include <cmath>

namespace finslab::jets {
namespace {

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

std::vector<std::pair<double, double>> central_stencil(int k) {
  std::vector<std::pair<double, double>> s;
  for (int j = 0; j <= k; ++j) s.emplace_back(0.5 * k - j, ((j % 2) ? -1.0 : 1.0) * binomial(k, j));
  return s;
}

std::vector<std::pair<double, double>> forward_stencil(int k) {
  std::vector<std::pair<double, double>> s;
  for (int j = 0; j <= k; ++j) s.emplace_back(j, (((k - j) % 2) ? -1.0 : 1.0) * binomial(k, j));
  return s;
}

DerivativeEstimate richardson_extrapolate(const std::vector<StepRecord>& steps, int p0, int q) {
  DerivativeEstimate out;
  out.steps = steps;
  const std::size_t m = steps.size();
  if (m == 0) throw std::invalid_argument("richardson: empty step schedule");
  const std::size_t dim = steps[0].estimate.size();
  // table[i][j]: j-fold extrapolation using steps i-j..i
  std::vector<std::vector<std::vector<double>>> table(m);
  for (std::size_t i = 0; i < m; ++i) {
    table[i].push_back(steps[i].estimate);
    for (std::size_t j = 1; j <= i; ++j) {
      const double factor = std::pow(2.0, p0 + static_cast<int>(j - 1) * q) - 1.0;
      std::vector<double> next(dim);
      for (std::size_t c = 0; c < dim; ++c)
        next[c] = table[i][j - 1][c] + (table[i][j - 1][c] - table[i - 1][j - 1][c]) / factor;
      table[i].push_back(std::move(next));
    }
  }
  out.value = table[m - 1][m - 1];
  if (m >= 2) {
    std::vector<double> diff(dim);
    for (std::size_t c = 0; c < dim; ++c) diff[c] = table[m - 1][m - 1][c] - table[m - 1][m - 2][c];
    out.error = max_abs(diff);
  } else {
    out.error = std::numeric_limits<double>::infinity();
  }
  out.converged = out.error <= kConvergenceTolerance * std::max(1.0, max_abs(out.value));
  return out;
}

DerivativeEstimate richardson(const std::function<std::vector<double>(double)>& quotient, StepSchedule schedule,
                              int p0, int q) {
  if (schedule.levels < 1 || !(schedule.h0 > 0.0)) throw std::invalid_argument("richardson: bad step schedule");
  std::vector<StepRecord> steps;
  double h = schedule.h0;
  for (int i = 0; i < schedule.levels; ++i, h *= 0.5) steps.push_back({h, quotient(h)});
  return richardson_extrapolate(steps, p0, q);
}

DerivativeEstimate curve_derivative(const std::function<std::vector<double>(double)>& c, int k,
                                    StepSchedule schedule, double t0, bool one_sided) {
  if (k < 0) throw std::invalid_argument("curve_derivative: negative order");
  if (k == 0) return DerivativeEstimate{c(t0), 0.0, true, {}};
  const auto stencil = one_sided ? forward_stencil(k) : central_stencil(k);
  auto quotient = [&](double h) {
    std::vector<double> acc;
    for (const auto& [offset, weight] : stencil) {
      const auto v = c(t0 + offset * h);
      if (acc.empty()) acc.assign(v.size(), 0.0);
      for (std::size_t i = 0; i < v.size(); ++i) acc[i] += weight * v[i];
    }
    const double scale = std::pow(h, k);
    for (double& a : acc) a /= scale;
    return acc;
  };
  return one_sided ? richardson(quotient, schedule, 1, 1) : richardson(quotient, schedule, 2, 2);
}

DerivativeEstimate curve_derivative(const SmoothMap& c, int k, DiffMode mode, StepSchedule schedule, double t0) {
  if (c.domain_dim() != 1) throw std::invalid_argument("curve_derivative: curve must have a 1-dimensional domain");
  if (mode == DiffMode::jet) {
    const auto jets_out = c.expand(std::vector<double>{t0}, k);
    DerivativeEstimate out;
    for (const Jet& j : jets_out) out.value.push_back(j.derivative_along(0, k));
    return out;
  }
  return curve_derivative([&](double t) { return c(std::vector<double>{t}); }, k, schedule, t0);
}

DerivativeEstimate mixed_partial(const SmoothMap& f, int k, int l, DiffMode mode, StepSchedule schedule) {
  if (f.domain_dim() != 2) throw std::invalid_argument("mixed_partial: map must have a 2-dimensional domain");
  if (k < 0 || l < 0) throw std::invalid_argument("mixed_partial: negative order");
  if (mode == DiffMode::jet) {
    const auto jets_out = f.expand(std::vector<double>{0.0, 0.0}, k + l);
    DerivativeEstimate out;
    for (const Jet& j : jets_out) out.value.push_back(j.derivative({k, l}));
    return out;
  }
  const auto st = central_stencil(k);
  const auto ss = central_stencil(l);
  auto quotient = [&](double h) {
    std::vector<double> acc;
    for (const auto& [ot, wt] : st) {
      for (const auto& [os, ws] : ss) {
        const auto v = f(std::vector<double>{ot * h, os * h});
        if (acc.empty()) acc.assign(v.size(), 0.0);
        for (std::size_t i = 0; i < v.size(); ++i) acc[i] += wt * ws * v[i];
      }
    }
    const double scale = std::pow(h, k + l);
    for (double& a : acc) a /= scale;
    return acc;
  };
  return richardson(quotient, schedule, 2, 2);
}

}  // namespace finslab::jets
