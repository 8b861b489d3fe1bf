#include "finslab/transport.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <sstream>

#include "finslab/expression.hpp"
#include "finslab/sampling.hpp"

namespace finslab {
namespace {

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd to_eigen(std::span<const double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Position and velocity of a curve piece at u.
void piece_state(const SmoothMap& c, double u, std::vector<double>& x, std::vector<double>& v) {
  const std::vector<double> uu{u};
  const auto j = c.expand(uu, 1);
  x.resize(j.size());
  v.resize(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    x[i] = j[i].value();
    v[i] = j[i].derivative_along(0, 1);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Curves

CurveSpec::CurveSpec(std::vector<SmoothMap> pieces, double junction_tol) : pieces_(std::move(pieces)) {
  if (pieces_.empty()) throw std::invalid_argument("CurveSpec: at least one piece required");
  const int n = pieces_[0].codomain_dim();
  for (const auto& p : pieces_)
    if (p.domain_dim() != 1 || p.codomain_dim() != n)
      throw std::invalid_argument("CurveSpec: pieces must map [0,1] into a common R^n");
  for (std::size_t k = 1; k < pieces_.size(); ++k) {
    const auto a = pieces_[k - 1]({1.0});
    const auto b = pieces_[k]({0.0});
    if (max_abs_diff(a, b) > junction_tol) {
      std::ostringstream os;
      os << "CurveSpec: pieces " << k - 1 << " and " << k << " do not meet (gap " << max_abs_diff(a, b) << ")";
      throw std::invalid_argument(os.str());
    }
  }
}

int CurveSpec::dim() const { return pieces_.at(0).codomain_dim(); }
std::vector<double> CurveSpec::start() const { return pieces_.front()({0.0}); }
std::vector<double> CurveSpec::end() const { return pieces_.back()({1.0}); }

std::vector<double> CurveSpec::point(double u) const {
  const double m = static_cast<double>(pieces_.size());
  const double s = std::clamp(u, 0.0, 1.0) * m;
  const std::size_t k = std::min(pieces_.size() - 1, static_cast<std::size_t>(std::floor(s)));
  return pieces_[k]({s - static_cast<double>(k)});
}

CurveSpec CurveSpec::reversed() const {
  std::vector<SmoothMap> out;
  for (auto it = pieces_.rbegin(); it != pieces_.rend(); ++it) {
    const SmoothMap piece = *it;
    out.push_back(SmoothMap(
        1, piece.codomain_dim(), Box::interval(0.0, 1.0),
        [piece](std::span<const Jet> u) {
          const std::vector<Jet> r{1.0 - u[0]};
          return piece(std::span<const Jet>(r));
        },
        piece.name() + "^-1"));
  }
  CurveSpec c;
  c.pieces_ = std::move(out);
  return c;
}

CurveSpec CurveSpec::concatenated(const CurveSpec& next) const {
  std::vector<SmoothMap> all = pieces_;
  all.insert(all.end(), next.pieces_.begin(), next.pieces_.end());
  return CurveSpec(std::move(all));
}

LoopSpec::LoopSpec(CurveSpec curve, double closure_tol) : curve_(std::move(curve)) {
  const double gap = max_abs_diff(curve_.start(), curve_.end());
  if (gap > closure_tol) {
    std::ostringstream os;
    os << "LoopSpec: curve is not closed (gap " << gap << ")";
    throw std::invalid_argument(os.str());
  }
}

namespace presets {

SmoothMap segment(std::vector<double> a, std::vector<double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("segment: endpoint dimensions differ");
  const int n = static_cast<int>(a.size());
  return SmoothMap(
      1, n, Box::interval(0.0, 1.0),
      [a, b](std::span<const Jet> u) {
        std::vector<Jet> out;
        for (std::size_t i = 0; i < a.size(); ++i) {
          // a + u (b - a), written so that u = 1 gives b exactly
          out.push_back(a[i] * (1.0 - u[0]) + b[i] * u[0]);
        }
        return out;
      },
      "segment");
}

CurveSpec polyline(const std::vector<std::vector<double>>& vertices) {
  if (vertices.size() < 2) throw std::invalid_argument("polyline: need at least two vertices");
  std::vector<SmoothMap> pieces;
  for (std::size_t k = 1; k < vertices.size(); ++k) pieces.push_back(segment(vertices[k - 1], vertices[k]));
  return CurveSpec(std::move(pieces));
}

LoopSpec polygon(std::vector<std::vector<double>> vertices) {
  vertices.push_back(vertices.front());
  return LoopSpec(polyline(vertices));
}

LoopSpec rectangle(std::vector<double> base, int i, int j, double a0, double a1, double b0, double b1) {
  const int n = static_cast<int>(base.size());
  if (i < 0 || j < 0 || i >= n || j >= n || i == j) throw std::invalid_argument("rectangle: bad coordinate pair");
  auto corner = [&](double a, double b) {
    auto v = base;
    v[i] = a;
    v[j] = b;
    return v;
  };
  return polygon({corner(a0, b0), corner(a1, b0), corner(a1, b1), corner(a0, b1)});
}

LoopSpec constant(std::vector<double> p) {
  return LoopSpec(CurveSpec({SmoothMap::constant(std::move(p), 1, Box::interval(0.0, 1.0), "const")}));
}

CurveSpec from_expressions(const std::vector<std::vector<std::string>>& pieces) {
  std::vector<SmoothMap> maps;
  for (const auto& comps : pieces) maps.push_back(expression_map(comps, {"t"}, Box::interval(0.0, 1.0)));
  return CurveSpec(std::move(maps), 1e-12);
}

}  // namespace presets

CurveSpec hermite_curve(const std::vector<double>& times, const std::vector<std::vector<double>>& points,
                        const std::vector<std::vector<double>>& velocities) {
  if (times.size() < 2 || points.size() != times.size() || velocities.size() != times.size())
    throw std::invalid_argument("hermite_curve: need matching knot arrays of length >= 2");
  std::vector<SmoothMap> pieces;
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    const double dt = times[k + 1] - times[k];
    std::vector<double> a = points[k], b = points[k + 1], va = velocities[k], vb = velocities[k + 1];
    for (double& v : va) v *= dt;
    for (double& v : vb) v *= dt;
    pieces.push_back(SmoothMap(
        1, static_cast<int>(a.size()), Box::interval(0.0, 1.0),
        [a, b, va, vb](std::span<const Jet> uu) {
          const Jet& u = uu[0];
          const Jet u2 = u * u;
          const Jet u3 = u2 * u;
          const Jet h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
          const Jet h10 = u3 - 2.0 * u2 + u;
          const Jet h01 = 3.0 * u2 - 2.0 * u3;
          const Jet h11 = u3 - u2;
          std::vector<Jet> out;
          for (std::size_t i = 0; i < a.size(); ++i) out.push_back(h00 * a[i] + h10 * va[i] + h01 * b[i] + h11 * vb[i]);
          return out;
        },
        "hermite"));
  }
  return CurveSpec(std::move(pieces), 1e-9);
}

// ---------------------------------------------------------------------------
// Transport

TransportOptions tight_transport_options() {
  TransportOptions o;
  o.ode.atol = 1e-13;
  o.ode.rtol = 1e-12;
  return o;
}

TransportResult parallel_transport(const FinslerNorm& F, const CurveSpec& c, std::span<const double> y0,
                                   const TransportOptions& opt) {
  const int n = F.dim();
  if (c.dim() != n || static_cast<int>(y0.size()) != n)
    throw std::invalid_argument("parallel_transport: dimension mismatch");
  TransportResult res;
  res.y_start.assign(y0.begin(), y0.end());
  const auto x_start = c.start();
  const double f0 = F(x_start, y0);
  Eigen::VectorXd y = to_eigen(y0);
  for (const auto& piece : c.pieces()) {
    auto rhs = [&F, &piece, n](double u, const Eigen::VectorXd& yy, Eigen::VectorXd& dy) {
      std::vector<double> x, v;
      piece_state(piece, u, x, v);
      dy.setZero(n);
      if (std::all_of(v.begin(), v.end(), [](double a) { return a == 0.0; })) return;
      const Eigen::MatrixXd Gj = nonlinear_connection(F, x, std::span<const double>(yy.data(), n));
      dy = -Gj * to_eigen(v);
    };
    auto r = ode::integrate(rhs, 0.0, 1.0, y, opt.ode);
    y = r.y;
    res.stats += r.stats;
  }
  res.y_end = to_std(y);
  res.norm_drift = std::abs(F(c.end(), res.y_end) - f0);
  res.flagged = res.norm_drift > opt.norm_tolerance * f0;
  return res;
}

std::vector<TransportResult> holonomy_map(const FinslerNorm& F, const LoopSpec& loop,
                                          const std::vector<std::vector<double>>& samples,
                                          const TransportOptions& opt) {
  const auto p = loop.base_point();
  std::vector<TransportResult> out;
  for (const auto& y : samples) {
    const double f = F(p, y);
    if (std::abs(f - 1.0) > 1e-10) {
      std::ostringstream os;
      os << "holonomy_map: sample is not on the indicatrix (F = " << f << ")";
      throw std::invalid_argument(os.str());
    }
    out.push_back(parallel_transport(F, loop.curve(), y, opt));
  }
  return out;
}

std::vector<std::vector<double>> indicatrix_samples(const FinslerNorm& F, std::span<const double> p, int count,
                                                    double phase) {
  std::vector<std::vector<double>> out;
  for (const auto& d : sampling::direction_grid(F.dim(), count, 0, phase)) out.push_back(to_indicatrix(F, p, d));
  return out;
}

double rotation_angle(const FinslerNorm& F, std::span<const double> p, std::span<const double> u,
                      std::span<const double> v) {
  if (F.dim() != 2) throw std::invalid_argument("rotation_angle: only defined for n = 2");
  const auto g = metric_tensor(F, p, u).g;
  const Eigen::MatrixXd L = g.llt().matrixU();
  const Eigen::Vector2d a = L * to_eigen(u), b = L * to_eigen(v);
  return std::atan2(a(0) * b(1) - a(1) * b(0), a.dot(b));
}

// ---------------------------------------------------------------------------
// Flows

FlowResult flow(const SmoothMap& X, std::span<const double> p, double T, bool with_jacobian,
                const ode::Options& opt) {
  const int n = X.domain_dim();
  if (X.codomain_dim() != n || static_cast<int>(p.size()) != n)
    throw std::invalid_argument("flow: X must be a vector field matching the start point");
  Eigen::VectorXd s(with_jacobian ? n + n * n : n);
  s.head(n) = to_eigen(p);
  if (with_jacobian) {
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    s.tail(n * n) = Eigen::Map<const Eigen::VectorXd>(I.data(), n * n);
  }
  auto rhs = [&X, n, with_jacobian](double, const Eigen::VectorXd& z, Eigen::VectorXd& dz) {
    dz.resize(z.size());
    const std::span<const double> x(z.data(), n);
    if (!with_jacobian) {
      const auto v = X(x);
      for (int i = 0; i < n; ++i) dz[i] = v[i];
      return;
    }
    const auto jets_out = X.expand(x, 1);
    Eigen::MatrixXd DX(n, n);
    std::vector<int> a(n, 0);
    for (int i = 0; i < n; ++i) {
      dz[i] = jets_out[i].value();
      for (int j = 0; j < n; ++j) {
        a[j] = 1;
        DX(i, j) = jets_out[i].derivative(a);
        a[j] = 0;
      }
    }
    const Eigen::Map<const Eigen::MatrixXd> J(z.data() + n, n, n);
    Eigen::Map<Eigen::MatrixXd>(dz.data() + n, n, n) = DX * J;
  };
  ode::Options o = opt;
  o.control_size = n;
  auto r = ode::integrate(rhs, 0.0, T, s, o);
  FlowResult out;
  out.x.assign(r.y.data(), r.y.data() + n);
  if (with_jacobian) out.jacobian = Eigen::Map<const Eigen::MatrixXd>(r.y.data() + n, n, n);
  out.stats = r.stats;
  return out;
}

CurveSpec flow_curve(const SmoothMap& X, std::span<const double> p, double T, int knots, const ode::Options& opt) {
  if (knots < 1) throw std::invalid_argument("flow_curve: need at least one interval");
  std::vector<double> times;
  std::vector<std::vector<double>> pts, vel;
  std::vector<double> x(p.begin(), p.end());
  for (int k = 0; k <= knots; ++k) {
    if (k > 0) x = flow(X, x, T / knots, false, opt).x;
    times.push_back(static_cast<double>(k) / knots);
    pts.push_back(x);
    auto v = X(x);
    for (double& a : v) a *= T;
    vel.push_back(std::move(v));
  }
  return hermite_curve(times, pts, vel);
}

// ---------------------------------------------------------------------------
// Parallelogram loops

namespace {

// X restricted to the chart: leaving it is a DomainError inside the integrator.
SmoothMap chart_restricted(const SmoothMap& X, const ChartManifold& M) {
  const int n = X.domain_dim();
  return SmoothMap(n, n, M.chart, [X](std::span<const Jet> z) { return X(z); }, X.name());
}

std::vector<double> scaled(std::vector<double> v, double s) {
  for (double& a : v) a *= s;
  return v;
}

// beta_{t,s}(p) and its s-derivative.
std::pair<std::vector<double>, std::vector<double>> beta_point(const SmoothMap& X, const SmoothMap& Y,
                                                               std::span<const double> p, double s,
                                                               const ode::Options& opt) {
  const auto f1 = flow(X, p, s, false, opt);
  const auto f2 = flow(Y, f1.x, s, true, opt);
  const auto f3 = flow(X, f2.x, -s, true, opt);
  const auto f4 = flow(Y, f3.x, -s, true, opt);
  const Eigen::VectorXd d1 = to_eigen(X(f1.x));
  const Eigen::VectorXd d2 = to_eigen(Y(f2.x)) + f2.jacobian * d1;
  const Eigen::VectorXd d3 = -to_eigen(X(f3.x)) + f3.jacobian * d2;
  const Eigen::VectorXd d4 = -to_eigen(Y(f4.x)) + f4.jacobian * d3;
  return {f4.x, to_std(d4)};
}

ParallelogramLoop build_parallelogram(const ChartManifold& M, const SmoothMap& Xc, const SmoothMap& Yc,
                                      std::span<const double> p, double t, const ParallelogramOptions& opt) {
  ParallelogramLoop L;
  L.X = Xc;
  L.Y = Yc;
  L.p.assign(p.begin(), p.end());
  L.t = t;
  const auto& o = opt.transport.ode;
  if (t == 0.0) {
    L.corners.assign(5, L.p);
    L.alpha = CurveSpec({SmoothMap::constant(L.p, 1, Box::interval(0.0, 1.0), "const")});
    L.beta = L.alpha;
    L.loop = LoopSpec(L.alpha.concatenated(L.beta.reversed()));
    return L;
  }
  const SmoothMap X = chart_restricted(Xc, M), Y = chart_restricted(Yc, M);
  const SmoothMap* fields[4] = {&X, &Y, &X, &Y};
  const double signs[4] = {1.0, 1.0, -1.0, -1.0};
  std::vector<SmoothMap> pieces;
  L.corners.push_back(L.p);
  for (int k = 0; k < 4; ++k) {
    const auto seg = flow_curve(*fields[k], L.corners.back(), signs[k] * t, opt.flow_knots, o);
    pieces.insert(pieces.end(), seg.pieces().begin(), seg.pieces().end());
    L.corners.push_back(seg.end());
  }
  L.alpha = CurveSpec(std::move(pieces));

  const int K = opt.beta_knots;
  std::vector<double> times;
  std::vector<std::vector<double>> pts, vel;
  for (int k = 0; k <= K; ++k) {
    const double sigma = static_cast<double>(k) / K;
    times.push_back(sigma);
    if (k == 0) {
      pts.push_back(L.p);
      vel.push_back(std::vector<double>(L.p.size(), 0.0));
      continue;
    }
    auto [x, v] = beta_point(X, Y, L.p, sigma * t, o);
    if (k == K) {
      L.closure_mismatch = max_abs_diff(x, L.corners.back());
      x = L.corners.back();
    }
    pts.push_back(std::move(x));
    vel.push_back(scaled(std::move(v), t));
  }
  L.beta = hermite_curve(times, pts, vel);
  L.loop = LoopSpec(L.alpha.concatenated(L.beta.reversed()), 0.0);
  return L;
}

}  // namespace

ParallelogramLoop make_parallelogram(const ChartManifold& M, const SmoothMap& X, const SmoothMap& Y,
                                     std::span<const double> p, double t, const ParallelogramOptions& opt) {
  M.require_inside(p);
  try {
    return build_parallelogram(M, X, Y, p, t, opt);
  } catch (const ode::StepUnderflow& e) {
    // Largest |t| for which the construction stays in the chart, by bisection.
    double lo = 0.0, hi = std::abs(t);
    const double sign = t < 0 ? -1.0 : 1.0;
    ParallelogramOptions coarse = opt;
    coarse.flow_knots = 8;
    coarse.beta_knots = 8;
    coarse.transport.ode = ode::Options{};
    for (int it = 0; it < 30 && hi - lo > 1e-6 * std::abs(t); ++it) {
      const double mid = 0.5 * (lo + hi);
      try {
        build_parallelogram(M, X, Y, p, sign * mid, coarse);
        lo = mid;
      } catch (const ode::StepUnderflow&) {
        hi = mid;
      }
    }
    std::ostringstream os;
    os << "parallelogram flow leaves the chart for t = " << t << " (max admissible |t| ~ " << lo << "): " << e.what();
    throw FlowEscapeError(os.str(), lo);
  }
}

ParallelogramHolonomy parallelogram_holonomy(const FinslerNorm& F, const SmoothMap& X, const SmoothMap& Y,
                                             std::span<const double> p, double t,
                                             const std::vector<std::vector<double>>& samples,
                                             const ParallelogramOptions& opt) {
  ParallelogramHolonomy out;
  out.t = t;
  if (t == 0.0) {
    out.images = samples;
    return out;
  }
  const auto L = make_parallelogram(F.manifold(), X, Y, p, t, opt);
  out.closure_mismatch = L.closure_mismatch;
  for (const auto& v : samples) {
    auto r = parallel_transport(F, L.loop.curve(), v, opt.transport);
    out.images.push_back(std::move(r.y_end));
    out.stats += r.stats;
  }
  return out;
}

HolonomyDerivatives parallelogram_derivatives(const FinslerNorm& F, const SmoothMap& X, const SmoothMap& Y,
                                              std::span<const double> p,
                                              const std::vector<std::vector<double>>& samples,
                                              jets::StepSchedule schedule, const ParallelogramOptions& opt) {
  std::vector<double> hs;
  double h = schedule.h0;
  for (int i = 0; i < schedule.levels; ++i, h *= 0.5) hs.push_back(h);
  const std::vector<double> pv(p.begin(), p.end());
  std::vector<std::future<ParallelogramHolonomy>> plus, minus;
  for (double step : hs) {
    plus.push_back(std::async(std::launch::async, [&, step] {
      return parallelogram_holonomy(F, X, Y, pv, step, samples, opt);
    }));
    minus.push_back(std::async(std::launch::async, [&, step] {
      return parallelogram_holonomy(F, X, Y, pv, -step, samples, opt);
    }));
  }
  std::vector<ParallelogramHolonomy> hp, hm;
  for (auto& f : plus) hp.push_back(f.get());
  for (auto& f : minus) hm.push_back(f.get());

  HolonomyDerivatives out;
  for (std::size_t s = 0; s < samples.size(); ++s) {
    std::vector<jets::StepRecord> r1, r2;
    const auto& v = samples[s];
    for (std::size_t l = 0; l < hs.size(); ++l) {
      std::vector<double> q1(v.size()), q2(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double a = hp[l].images[s][i], b = hm[l].images[s][i];
        q1[i] = (a - b) / (2.0 * hs[l]);
        q2[i] = (a - 2.0 * v[i] + b) / (hs[l] * hs[l]);
      }
      r1.push_back({hs[l], q1});
      r2.push_back({hs[l], q2});
    }
    auto d1 = jets::richardson_extrapolate(r1, 2, 2);
    auto d2 = jets::richardson_extrapolate(r2, 2, 2);
    out.first.push_back(d1.value);
    out.second.push_back(d2.value);
    out.first_error.push_back(d1.error);
    out.second_error.push_back(d2.error);
    out.raw_second.push_back(std::move(d2));
  }
  return out;
}

double flow_transport_discrepancy(const FinslerNorm& F, const SmoothMap& X, std::span<const double> p,
                                  std::span<const double> y0, double t, const TransportOptions& opt) {
  const int n = F.dim();
  F.manifold().require_inside(p);
  const SmoothMap Xc = chart_restricted(X, F.manifold());
  // (a) transport along the integral curve
  const auto curve = flow_curve(Xc, p, t, 64, opt.ode);
  const auto a = parallel_transport(F, curve, y0, opt);
  // (b) flow of the horizontal lift on the tangent bundle
  Eigen::VectorXd z(2 * n);
  z.head(n) = to_eigen(p);
  z.tail(n) = to_eigen(y0);
  auto rhs = [&F, &Xc, n](double, const Eigen::VectorXd& s, Eigen::VectorXd& ds) {
    ds.setZero(2 * n);
    const std::span<const double> x(s.data(), n), y(s.data() + n, n);
    const auto v = Xc(x);
    if (std::all_of(v.begin(), v.end(), [](double q) { return q == 0.0; })) return;
    const Eigen::VectorXd X = to_eigen(v);
    ds.head(n) = X;
    ds.tail(n) = -nonlinear_connection(F, x, y) * X;
  };
  const auto b = ode::integrate(rhs, 0.0, t, z, opt.ode);
  double d = 0.0;
  for (int i = 0; i < n; ++i) d += (a.y_end[i] - b.y[n + i]) * (a.y_end[i] - b.y[n + i]);
  return std::sqrt(d);
}

std::vector<FiberResult> fibered_holonomy_family(const FinslerNorm& F, const SmoothMap& X, const SmoothMap& Y,
                                                 const std::vector<std::vector<double>>& grid, double t,
                                                 int samples_per_fiber, const ParallelogramOptions& opt) {
  std::vector<std::future<FiberResult>> jobs;
  for (const auto& p : grid) {
    jobs.push_back(std::async(std::launch::async, [&, p] {
      FiberResult r;
      r.p = p;
      try {
        const auto samples = indicatrix_samples(F, p, samples_per_fiber);
        r.holonomy = parallelogram_holonomy(F, X, Y, p, t, samples, opt);
      } catch (const std::exception& e) {
        r.error = e.what();
      }
      return r;
    }));
  }
  std::vector<FiberResult> out;
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

SmoothMap coordinate_field(int n, int i) {
  std::vector<double> e(n, 0.0);
  e.at(i) = 1.0;
  return SmoothMap::constant(e, n, Box::unbounded(n), "d/dx" + std::to_string(i + 1));
}

}  // namespace finslab
