#include "finslab/ode.hpp"

#include <algorithm>
#include <cmath>

namespace finslab::ode {

Stats& Stats::operator+=(const Stats& o) {
  accepted += o.accepted;
  rejected += o.rejected;
  max_local_error = std::max(max_local_error, o.max_local_error);
  last_step = o.last_step;
  return *this;
}

StepUnderflow::StepUnderflow(const std::string& what, double t, Eigen::VectorXd y, std::string cause)
    : std::runtime_error(what), t_(t), y_(std::move(y)), cause_(std::move(cause)) {}

namespace {

void rk4_step(const Rhs& f, double t, const Eigen::VectorXd& y, double h, Eigen::VectorXd& out,
              Eigen::VectorXd& k1, Eigen::VectorXd& k2, Eigen::VectorXd& k3, Eigen::VectorXd& k4,
              const Eigen::VectorXd* f0) {
  if (f0) k1 = *f0;
  else f(t, y, k1);
  f(t + 0.5 * h, y + 0.5 * h * k1, k2);
  f(t + 0.5 * h, y + 0.5 * h * k2, k3);
  f(t + h, y + h * k3, k4);
  out = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

Result integrate(const Rhs& f, double t0, double t1, Eigen::VectorXd y0, const Options& opt) {
  Result r;
  r.y = std::move(y0);
  const double span = t1 - t0;
  if (span == 0.0) return r;
  const double dir = span > 0 ? 1.0 : -1.0;
  const double total = std::abs(span);
  const int m = opt.control_size < 0 ? static_cast<int>(r.y.size()) : opt.control_size;

  double h = opt.h_init > 0 ? std::min(opt.h_init, total) : total;
  double t = t0;
  Eigen::VectorXd k1, k2, k3, k4, f0, full, half, two, tmp;
  bool have_f0 = false;
  std::string last_cause;

  while (dir * (t1 - t) > 0.0) {
    if (r.stats.accepted + r.stats.rejected >= opt.max_steps)
      throw StepUnderflow("integrator step budget exhausted", t, r.y, "max_steps");
    const double remaining = std::abs(t1 - t);
    const bool last = h >= remaining * (1.0 - 1e-12);
    const double step = last ? remaining : h;
    const double hs = dir * step;
    double err = 0.0;
    bool ok = true;
    try {
      if (!have_f0) {
        f(t, r.y, f0);
        have_f0 = true;
      }
      rk4_step(f, t, r.y, hs, full, k1, k2, k3, k4, &f0);
      rk4_step(f, t, r.y, 0.5 * hs, half, k1, k2, k3, k4, &f0);
      rk4_step(f, t + 0.5 * hs, half, 0.5 * hs, two, k1, k2, k3, k4, nullptr);
      for (int i = 0; i < m; ++i) {
        const double e = std::abs(two[i] - full[i]) / 15.0;
        const double sc = opt.atol + opt.rtol * std::max(std::abs(r.y[i]), std::abs(two[i]));
        err = std::max(err, e / sc);
      }
      if (!std::isfinite(err) || !two.allFinite()) {
        ok = false;
        last_cause = "non-finite state";
      }
    } catch (const std::exception& e) {
      ok = false;
      last_cause = e.what();
    }
    if (ok && err <= 1.0) {
      r.y = two + (two - full) / 15.0;
      t = last ? t1 : t + hs;
      ++r.stats.accepted;
      r.stats.max_local_error = std::max(r.stats.max_local_error, err);
      r.stats.last_step = step;
      have_f0 = false;
      const double grow = err == 0.0 ? 4.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 4.0);
      h = step * grow;
    } else {
      ++r.stats.rejected;
      const double shrink = ok ? std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.5) : 0.25;
      h = step * shrink;
      if (h < opt.h_min) {
        throw StepUnderflow("integrator step size underflow at t = " + std::to_string(t) +
                                (last_cause.empty() ? std::string() : " (" + last_cause + ")"),
                            t, r.y, last_cause.empty() ? "error control" : last_cause);
      }
    }
  }
  return r;
}

}  // namespace finslab::ode
