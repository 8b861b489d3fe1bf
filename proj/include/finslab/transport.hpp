#pragma once

#include <optional>
#include <string>
#include <vector>

#include "finslab/derivatives.hpp"
#include "finslab/finsler.hpp"
#include "finslab/ode.hpp"

namespace finslab {

/// Piecewise smooth curve in a chart. Each piece is a SmoothMap [0,1] -> R^n;
/// the whole curve is parametrized over [0,1] with equal time per piece.
class CurveSpec {
 public:
  CurveSpec() = default;
  /// Consecutive pieces must match at junctions within `junction_tol` (max-abs).
  explicit CurveSpec(std::vector<SmoothMap> pieces, double junction_tol = 1e-12);

  const std::vector<SmoothMap>& pieces() const { return pieces_; }
  int dim() const;
  std::vector<double> start() const;
  std::vector<double> end() const;
  /// Point at normalized parameter u in [0,1].
  std::vector<double> point(double u) const;

  CurveSpec reversed() const;
  /// This curve followed by `next`.
  CurveSpec concatenated(const CurveSpec& next) const;

 private:
  std::vector<SmoothMap> pieces_;
};

/// Closed curve; start equals end exactly (or within 1e-12 for analytic presets).
class LoopSpec {
 public:
  LoopSpec() = default;
  explicit LoopSpec(CurveSpec curve, double closure_tol = 1e-12);
  const CurveSpec& curve() const { return curve_; }
  std::vector<double> base_point() const { return curve_.start(); }
  LoopSpec reversed() const { return LoopSpec(curve_.reversed()); }
  LoopSpec concatenated(const LoopSpec& next) const { return LoopSpec(curve_.concatenated(next.curve_)); }

 private:
  CurveSpec curve_;
};

namespace presets {
/// Straight segment a -> b.
SmoothMap segment(std::vector<double> a, std::vector<double> b);
CurveSpec polyline(const std::vector<std::vector<double>>& vertices);
/// Closed polygon through the vertices (back to the first).
LoopSpec polygon(std::vector<std::vector<double>> vertices);
/// Coordinate rectangle in the (i, j) plane through `base`, visiting
/// (a0,b0) -> (a1,b0) -> (a1,b1) -> (a0,b1) -> (a0,b0).
LoopSpec rectangle(std::vector<double> base, int i, int j, double a0, double a1, double b0, double b1);
LoopSpec constant(std::vector<double> p);
/// One piece per entry; each entry lists component expressions in `t` on [0,1].
CurveSpec from_expressions(const std::vector<std::vector<std::string>>& pieces);
}  // namespace presets

/// Cubic Hermite interpolant through (times[k], points[k], velocities[k]); one piece per interval.
CurveSpec hermite_curve(const std::vector<double>& times, const std::vector<std::vector<double>>& points,
                        const std::vector<std::vector<double>>& velocities);

struct TransportOptions {
  ode::Options ode;
  /// Relative norm-drift level above which a result is flagged.
  double norm_tolerance = 1e-8;
};

/// Tolerances used for derivative checks where differences of
/// transports are divided by t^2.
TransportOptions tight_transport_options();

struct TransportResult {
  std::vector<double> y_start;
  std::vector<double> y_end;
  double norm_drift = 0.0;  // |F(end) - F(start)|
  bool flagged = false;     // norm_drift > norm_tolerance * F(start)
  ode::Stats stats;
};

/// Integrates dy^i/ds + G^i_j(c(s), y) c'^j(s) = 0 piece by piece.
TransportResult parallel_transport(const FinslerNorm& F, const CurveSpec& c, std::span<const double> y0,
                                   const TransportOptions& opt = {});

/// Transports indicatrix samples around a loop. Samples must satisfy F(p, y) = 1 within 1e-10.
std::vector<TransportResult> holonomy_map(const FinslerNorm& F, const LoopSpec& loop,
                                          const std::vector<std::vector<double>>& samples,
                                          const TransportOptions& opt = {});

/// Indicatrix samples at p: y / F(p, y) over a Euclidean direction grid.
std::vector<std::vector<double>> indicatrix_samples(const FinslerNorm& F, std::span<const double> p, int count,
                                                    double phase = 0.0);

/// Signed rotation angle from u to v measured in a g_p-orthonormal frame
/// (n = 2; g evaluated at (p, u)).
double rotation_angle(const FinslerNorm& F, std::span<const double> p, std::span<const double> u,
                      std::span<const double> v);

// ---------------------------------------------------------------------------
// Flows

struct FlowResult {
  std::vector<double> x;
  Eigen::MatrixXd jacobian;  // d(flow)/d(start); empty unless requested
  ode::Stats stats;
};

/// Flow of a vector field X for time T (negative allowed). Error control uses
/// the base components only, so the trajectory does not depend on whether the
/// Jacobian is carried along.
FlowResult flow(const SmoothMap& X, std::span<const double> p, double T, bool with_jacobian = false,
                const ode::Options& opt = {});

/// Dense flow curve s -> phi_{sT}(p), s in [0,1], as Hermite pieces with `knots` intervals.
CurveSpec flow_curve(const SmoothMap& X, std::span<const double> p, double T, int knots = 64,
                     const ode::Options& opt = {});

class FlowEscapeError : public DomainError {
 public:
  FlowEscapeError(const std::string& what, double max_admissible_t)
      : DomainError(what), max_admissible_t_(max_admissible_t) {}
  double max_admissible_t() const { return max_admissible_t_; }

 private:
  double max_admissible_t_;
};

struct ParallelogramOptions {
  int flow_knots = 64;
  int beta_knots = 32;
  TransportOptions transport = tight_transport_options();
};

/// The loop alpha_t(p) * beta_t(p)^{-1}: alpha runs along the flows of X, Y,
/// X backwards, Y backwards for time t each; beta_{t,s} = psi_{-s} phi_{-s} psi_s phi_s (p).
struct ParallelogramLoop {
  SmoothMap X, Y;
  std::vector<double> p;
  double t = 0.0;
  std::vector<std::vector<double>> corners;  // p, phi_t p, psi_t phi_t p, ...
  CurveSpec alpha;
  CurveSpec beta;
  LoopSpec loop;
  double closure_mismatch = 0.0;
};

ParallelogramLoop make_parallelogram(const ChartManifold& M, const SmoothMap& X, const SmoothMap& Y,
                                     std::span<const double> p, double t, const ParallelogramOptions& opt = {});

struct ParallelogramHolonomy {
  double t = 0.0;
  std::vector<std::vector<double>> images;  // h_{t,p}(v) per sample
  ode::Stats stats;
  double closure_mismatch = 0.0;
};

ParallelogramHolonomy parallelogram_holonomy(const FinslerNorm& F, const SmoothMap& X, const SmoothMap& Y,
                                             std::span<const double> p, double t,
                                             const std::vector<std::vector<double>>& samples,
                                             const ParallelogramOptions& opt = {});

struct HolonomyDerivatives {
  std::vector<std::vector<double>> first;   // d/dt h_{t,p}(v) at 0, per sample
  std::vector<std::vector<double>> second;  // d^2/dt^2 h_{t,p}(v) at 0, per sample
  std::vector<double> first_error, second_error;
  std::vector<jets::DerivativeEstimate> raw_second;  // step diagnostics per sample
};

/// Richardson central differences over t in {h0, h0/2, ...} using h_{+-t,p}.
HolonomyDerivatives parallelogram_derivatives(const FinslerNorm& F, const SmoothMap& X, const SmoothMap& Y,
                                              std::span<const double> p,
                                              const std::vector<std::vector<double>>& samples,
                                              jets::StepSchedule schedule = {0.08, 4},
                                              const ParallelogramOptions& opt = {});

/// Distance between (a) transporting y0 along the integral curve of X from p
/// and (b) flowing (p, y0) along X^h, both for time t.
double flow_transport_discrepancy(const FinslerNorm& F, const SmoothMap& X, std::span<const double> p,
                                  std::span<const double> y0, double t, const TransportOptions& opt = {});

struct FiberResult {
  std::vector<double> p;
  std::optional<ParallelogramHolonomy> holonomy;
  std::string error;  // empty on success
};

/// h_{t,p} over a grid of base points; fibers run concurrently, output in grid order.
std::vector<FiberResult> fibered_holonomy_family(const FinslerNorm& F, const SmoothMap& X, const SmoothMap& Y,
                                                 const std::vector<std::vector<double>>& grid, double t,
                                                 int samples_per_fiber, const ParallelogramOptions& opt = {});

/// Coordinate vector field d/dx^i on an n-dimensional chart.
SmoothMap coordinate_field(int n, int i);

}  // namespace finslab
