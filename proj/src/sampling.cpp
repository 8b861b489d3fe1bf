#include "finslab/sampling.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace finslab::sampling {
namespace {

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13};

// Hyperspherical angles (each in [0, 1)) to a unit vector in R^n.
std::vector<double> from_angles(int n, const std::vector<double>& u) {
  const double pi = std::numbers::pi;
  std::vector<double> v(n, 1.0);
  // polar angles in [0, pi] for all but the last, which spans [0, 2 pi)
  for (int k = 0; k < n - 1; ++k) {
    const double a = (k == n - 2) ? 2.0 * pi * u[k] : std::acos(1.0 - 2.0 * u[k]);
    for (int j = k + 1; j < n; ++j) v[j] *= std::sin(a);
    v[k] *= std::cos(a);
  }
  return v;
}

}  // namespace

double radical_inverse(std::uint64_t i, int base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

std::vector<std::vector<double>> direction_grid(int n, int count, std::uint64_t seed, double phase) {
  if (n < 2) throw std::invalid_argument("direction_grid: dimension must be at least 2");
  std::vector<std::vector<double>> out;
  const double pi = std::numbers::pi;
  for (int k = 0; k < count; ++k) {
    if (n == 2) {
      const double a = 2.0 * pi * (static_cast<double>(k) / count + phase);
      out.push_back({std::cos(a), std::sin(a)});
    } else {
      std::vector<double> u(n - 1);
      for (int d = 0; d < n - 1; ++d) u[d] = radical_inverse(seed + k + 1, kPrimes[d]);
      out.push_back(from_angles(n, u));
    }
  }
  return out;
}

std::vector<std::vector<double>> low_discrepancy_directions(int n, int count, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("low_discrepancy_directions: dimension must be at least 2");
  std::vector<std::vector<double>> out;
  const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
  const double offset = radical_inverse(seed + 1, 2);
  for (int k = 0; k < count; ++k) {
    if (n == 2) {
      const double u = std::fmod(offset + golden * (k + 1), 1.0);
      const double a = 2.0 * std::numbers::pi * u;
      out.push_back({std::cos(a), std::sin(a)});
    } else {
      std::vector<double> u(n - 1);
      for (int d = 0; d < n - 1; ++d) u[d] = radical_inverse(seed + k + 1, kPrimes[d]);
      out.push_back(from_angles(n, u));
    }
  }
  return out;
}

}  // namespace finslab::sampling
