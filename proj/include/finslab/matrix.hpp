#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "finslab/jet.hpp"

namespace finslab {

inline double value_of(double v) { return v; }
inline double value_of(const Jet& j) { return j.value(); }
inline double zero_like(double) { return 0.0; }
inline Jet zero_like(const Jet& j) { return Jet::constant(0.0, j.num_vars(), j.order()); }

class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Small dense square matrix over doubles or jets, row-major.
template <class T>
class Mat {
 public:
  Mat() = default;
  Mat(int n, const T& fill) : n_(n), a_(static_cast<std::size_t>(n) * n, fill) {}

  static Mat identity(int n, const T& proto) {
    Mat m(n, zero_like(proto));
    for (int i = 0; i < n; ++i) m(i, i) = m(i, i) + 1.0;
    return m;
  }

  int n() const { return n_; }
  T& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * n_ + j]; }
  const T& operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * n_ + j]; }
  const std::vector<T>& data() const { return a_; }

  Mat& operator+=(const Mat& o) {
    for (std::size_t k = 0; k < a_.size(); ++k) a_[k] = a_[k] + o.a_[k];
    return *this;
  }
  Mat& operator-=(const Mat& o) {
    for (std::size_t k = 0; k < a_.size(); ++k) a_[k] = a_[k] - o.a_[k];
    return *this;
  }
  Mat& operator*=(double s) {
    for (auto& v : a_) v = v * s;
    return *this;
  }
  friend Mat operator+(Mat a, const Mat& b) { return a += b; }
  friend Mat operator-(Mat a, const Mat& b) { return a -= b; }
  friend Mat operator*(Mat a, double s) { return a *= s; }
  friend Mat operator*(double s, Mat a) { return a *= s; }
  friend Mat operator*(const Mat& a, const Mat& b) {
    Mat c(a.n_, zero_like(a.a_[0]));
    for (int i = 0; i < a.n_; ++i)
      for (int k = 0; k < a.n_; ++k) {
        const T& aik = a(i, k);
        for (int j = 0; j < a.n_; ++j) c(i, j) = c(i, j) + aik * b(k, j);
      }
    return c;
  }

  /// Max-abs of the value parts.
  double max_abs() const {
    double m = 0.0;
    for (const auto& v : a_) m = std::max(m, std::abs(value_of(v)));
    return m;
  }

 private:
  int n_ = 0;
  std::vector<T> a_;
};

/// Gauss-Jordan inverse with partial pivoting on the value parts.
template <class T>
Mat<T> inverse(Mat<T> a) {
  const int n = a.n();
  Mat<T> inv = Mat<T>::identity(n, a(0, 0));
  const double scale = std::max(a.max_abs(), 1e-300);
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(value_of(a(r, col))) > std::abs(value_of(a(piv, col)))) piv = r;
    if (std::abs(value_of(a(piv, col))) <= 1e-14 * scale) throw SingularMatrixError("matrix is singular");
    if (piv != col)
      for (int j = 0; j < n; ++j) {
        std::swap(a(piv, j), a(col, j));
        std::swap(inv(piv, j), inv(col, j));
      }
    const T p = 1.0 / a(col, col);
    for (int j = 0; j < n; ++j) {
      a(col, j) = a(col, j) * p;
      inv(col, j) = inv(col, j) * p;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const T f = a(r, col);
      for (int j = 0; j < n; ++j) {
        a(r, j) = a(r, j) - f * a(col, j);
        inv(r, j) = inv(r, j) - f * inv(col, j);
      }
    }
  }
  return inv;
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
template <class T>
Mat<T> expm(const Mat<T>& a) {
  const int n = a.n();
  int squarings = 0;
  double norm = 0.0;
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) row += std::abs(value_of(a(i, j)));
    norm = std::max(norm, row);
  }
  while (norm > 0.25) {
    norm *= 0.5;
    ++squarings;
  }
  const Mat<T> s = a * std::ldexp(1.0, -squarings);
  Mat<T> term = Mat<T>::identity(n, a(0, 0));
  Mat<T> sum = term;
  for (int k = 1; k <= 18; ++k) {
    term = term * s;
    term *= 1.0 / k;
    sum += term;
  }
  for (int q = 0; q < squarings; ++q) sum = sum * sum;
  return sum;
}

}  // namespace finslab
