#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "finslab/smooth_map.hpp"

namespace finslab {

/// One coordinate chart of an n-manifold.
struct ChartManifold {
  int dim = 2;
  Box chart;
  std::string name;

  ChartManifold() = default;
  ChartManifold(int dim, Box chart, std::string name);
  /// Throws DomainError unless x lies in the chart.
  void require_inside(std::span<const double> x) const;
};

/// Positively 1-homogeneous norm F(x, y) on the tangent bundle of a chart.
/// The map F takes 2n inputs ordered (x^1..x^n, y^1..y^n).
class FinslerNorm {
 public:
  FinslerNorm() = default;
  FinslerNorm(ChartManifold manifold, SmoothMap F, bool riemannian = false);

  const ChartManifold& manifold() const { return manifold_; }
  const SmoothMap& F() const { return F_; }
  int dim() const { return manifold_.dim; }
  const std::string& name() const { return manifold_.name; }
  /// Declared (not detected) Riemannian structure; enables quadratic-form checks
  /// and the Christoffel-symbol path of nonlinear_connection.
  bool riemannian() const { return riemannian_; }

  double operator()(std::span<const double> x, std::span<const double> y) const;
  /// F on 2n bundle jets.
  Jet operator()(std::span<const Jet> xy) const;

 private:
  ChartManifold manifold_;
  SmoothMap F_;
  bool riemannian_ = false;
};

struct MetricTensor {
  std::vector<double> x, y;
  Eigen::MatrixXd g;
  double min_eigenvalue = 0.0;
  double condition = 0.0;
};

/// Geodesic coefficients and their first two y-derivatives at (x, y).
struct SprayData {
  std::vector<double> x, y;
  Eigen::VectorXd G;                      // G^i
  Eigen::MatrixXd Gj;                     // Gj(i, j) = dG^i/dy^j
  std::vector<Eigen::MatrixXd> Gjk;       // Gjk[i](j, k) = d^2 G^i / dy^j dy^k
};

/// Condition-number bound above which the metric tensor is treated as singular.
inline constexpr double kMetricConditionLimit = 1e12;

class SingularMetricError : public DomainError {
 public:
  using DomainError::DomainError;
};

MetricTensor metric_tensor(const FinslerNorm& F, std::span<const double> x, std::span<const double> y);
SprayData geodesic_coefficients(const FinslerNorm& F, std::span<const double> x, std::span<const double> y);

/// Jets (order `order`, 2n bundle variables centered at (x, y)) of the
/// geodesic coefficients, computed from
///   4 G^i = g^{il} (2 d_k g_{jl} - d_l g_{jk}) y^j y^k.
std::vector<Jet> spray_expansion(const FinslerNorm& F, std::span<const double> xy, int order);
/// Jets of the metric tensor g_ij (row-major n*n) at order `order`.
std::vector<Jet> metric_expansion(const FinslerNorm& F, std::span<const double> xy, int order);

/// G^i_j(x, y) as a plain matrix; the transport ODE right-hand side.
Eigen::MatrixXd nonlinear_connection(const FinslerNorm& F, std::span<const double> x, std::span<const double> y);

/// X^h at (x, y): (X, -G^k_i X^i).
Eigen::VectorXd horizontal_lift(const FinslerNorm& F, std::span<const double> X, std::span<const double> x,
                                std::span<const double> y);

struct HorizontalVertical {
  Eigen::VectorXd horizontal;
  Eigen::VectorXd vertical;
};
HorizontalVertical split_horizontal_vertical(const FinslerNorm& F, std::span<const double> x,
                                             std::span<const double> y, std::span<const double> V);

/// The horizontal lift of a base vector field X (SmoothMap n -> n) as a bundle
/// field (SmoothMap 2n -> 2n), jet-evaluable.
SmoothMap horizontal_lift_field(const FinslerNorm& F, const SmoothMap& X);

/// Euclidean-uniform directions rescaled onto the indicatrix: y / F(p, y).
std::vector<double> to_indicatrix(const FinslerNorm& F, std::span<const double> p, std::span<const double> y);

namespace catalog {

/// F = |y| on R^n (chart box [-5, 5]^n).
FinslerNorm euclidean(int n = 2);
/// Round unit sphere in spherical coordinates (theta, phi):
/// F = sqrt(y1^2 + sin(x1)^2 y2^2), theta in [0.2, pi - 0.2], phi in [-3, 3].
FinslerNorm sphere();
/// Flat torus chart with a constant non-diagonal metric on (0, 2 pi)^2.
FinslerNorm flat_torus();
/// Funk metric of the unit disk restricted to a chart inside the disk of radius 0.9:
/// F = (sqrt((1 - |x|^2)|y|^2 + <x, y>^2) + <x, y>) / (1 - |x|^2).
FinslerNorm funk();

/// Keys accepted by `by_name`.
std::vector<std::string> names();
FinslerNorm by_name(const std::string& key);

}  // namespace catalog

/// Custom metric from an expression in x1..xn, y1..yn.
FinslerNorm metric_from_expression(const std::string& F, int n, Box chart, std::string name = "custom",
                                   bool riemannian = false);

}  // namespace finslab
