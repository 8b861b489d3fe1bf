#pragma once

#include <functional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace finslab::ode {

struct Options {
  double atol = 1e-10;
  double rtol = 1e-9;
  /// First trial step; 0 means the whole interval.
  double h_init = 0.0;
  double h_min = 1e-13;
  long max_steps = 200000;
  /// Only the first `control_size` components enter the error norm (-1: all).
  int control_size = -1;
};

struct Stats {
  long accepted = 0;
  long rejected = 0;
  double max_local_error = 0.0;  // largest accepted scaled error estimate
  double last_step = 0.0;

  Stats& operator+=(const Stats& o);
};

using Rhs = std::function<void(double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy)>;

/// Raised when the step size underflows; carries the last accepted state.
class StepUnderflow : public std::runtime_error {
 public:
  StepUnderflow(const std::string& what, double t, Eigen::VectorXd y, std::string cause);
  double t() const { return t_; }
  const Eigen::VectorXd& state() const { return y_; }
  const std::string& cause() const { return cause_; }

 private:
  double t_;
  Eigen::VectorXd y_;
  std::string cause_;
};

struct Result {
  Eigen::VectorXd y;
  Stats stats;
};

/// Classical RK4 with step doubling: each step is compared against two half
/// steps, the difference (/15) is the local error estimate and the half-step
/// result is extrapolated. Exceptions thrown by the right-hand side (e.g.
/// leaving a chart) count as rejected steps. Integrates backwards if t1 < t0.
Result integrate(const Rhs& f, double t0, double t1, Eigen::VectorXd y0, const Options& opt = {});

}  // namespace finslab::ode
