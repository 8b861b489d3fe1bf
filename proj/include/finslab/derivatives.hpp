#pragma once

#include <functional>
#include <vector>

#include "finslab/smooth_map.hpp"

namespace finslab::jets {

enum class DiffMode { jet, richardson };

/// Finite-difference steps h, h/2, ..., h/2^(levels-1).
struct StepSchedule {
  double h0 = 0.1;
  int levels = 4;
};

struct StepRecord {
  double h = 0.0;
  std::vector<double> estimate;  // raw difference quotient at this step
};

struct DerivativeEstimate {
  std::vector<double> value;
  double error = 0.0;        // richardson residual; 0 in jet mode
  bool converged = true;
  std::vector<StepRecord> steps;
};

/// Residual threshold above which an extrapolation is flagged non-convergent:
/// kConvergenceTolerance * max(1, |value|).
inline constexpr double kConvergenceTolerance = 1e-6;

/// Neville-style extrapolation of a sequence computed at h0 / 2^i whose error
/// expands in powers h^p0, h^(p0+q), h^(p0+2q), ...
DerivativeEstimate richardson_extrapolate(const std::vector<StepRecord>& steps, int p0, int q);

/// Richardson extrapolation of a step-dependent difference quotient
/// (central differences: error in even powers of h).
DerivativeEstimate richardson(const std::function<std::vector<double>(double)>& quotient,
                              StepSchedule schedule, int p0 = 2, int q = 2);

/// Central difference weights for the k-th derivative: offsets (k/2 - j) h.
std::vector<std::pair<double, double>> central_stencil(int k);
/// Forward difference weights for the k-th derivative: offsets j h.
std::vector<std::pair<double, double>> forward_stencil(int k);

/// k-th derivative of a curve at t0.
DerivativeEstimate curve_derivative(const SmoothMap& c, int k, DiffMode mode, StepSchedule schedule = {},
                                    double t0 = 0.0);
/// Same, for a plain callable (used where the curve is not jet-evaluable).
DerivativeEstimate curve_derivative(const std::function<std::vector<double>(double)>& c, int k,
                                    StepSchedule schedule, double t0 = 0.0, bool one_sided = false);

/// d^(k+l) f / dt^k ds^l at the origin of a two-parameter map.
DerivativeEstimate mixed_partial(const SmoothMap& f, int k, int l, DiffMode mode, StepSchedule schedule = {});

}  // namespace finslab::jets
