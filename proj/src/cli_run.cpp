#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <future>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Core>

#include "cli_internal.hpp"
#include "finslab/expression.hpp"
#include "finslab/grouplab.hpp"
#include "finslab/inclusion_chain.hpp"
#include "finslab/liealg.hpp"

namespace finslab::cli {

using nlohmann::json;

namespace {

// Relative errors of vanishing quantities are taken against this floor.
constexpr double kDerivativeFloor = 1e-3;

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dist2(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

std::vector<double> scaled(std::vector<double> v, double s) {
  for (auto& x : v) x *= s;
  return v;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

bool evaluate(double value, double tol, const std::string& rel) {
  if (std::isnan(value)) return false;
  if (rel == "<") return value < tol;
  if (rel == "<=") return value <= tol;
  if (rel == ">") return value > tol;
  if (rel == ">=") return value >= tol;
  if (rel == "==") return value == tol;
  throw std::logic_error("unknown relation " + rel);
}

json check_json(const Check& c) {
  return {{"name", c.name},          {"value", c.value}, {"tolerance", c.tolerance},
          {"relation", c.relation}, {"pass", c.pass},   {"advisory", c.advisory}};
}

std::string iso_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// One task's evaluation context.
class Task {
 public:
  Task(const json& spec, std::uint64_t seed, bool parallel, TaskResult& out)
      : spec_(spec), cmd_(detail::command(spec.at("command").get<std::string>())), rng_(seed), seed_(seed),
        parallel_(parallel), out_(out) {}

  void run();

 private:
  double tol(const std::string& name) const {
    if (spec_.contains("tolerances") && spec_["tolerances"].contains(name))
      return spec_["tolerances"][name].get<double>();
    return cmd_.tolerances.at(name);
  }
  int integer(const std::string& key, int fallback) const { return spec_.value(key, fallback); }
  double number(const std::string& key, double fallback) const {
    return spec_.contains(key) ? detail::number(spec_[key]) : fallback;
  }
  void check(const std::string& name, double value, double tolerance, const std::string& rel, bool advisory = false) {
    out_.checks.push_back({name, value, tolerance, rel, evaluate(value, tolerance, rel), advisory});
  }

  std::vector<double> random_point(const FinslerNorm& F, double margin) {
    std::vector<double> p;
    for (int i = 0; i < F.dim(); ++i) {
      const double lo = F.manifold().chart.lo[i], hi = F.manifold().chart.hi[i];
      const double m = margin * (hi - lo);
      p.push_back(std::uniform_real_distribution<double>(lo + m, hi - m)(rng_));
    }
    return p;
  }
  std::vector<double> random_direction(int n) {
    std::normal_distribution<double> g;
    std::vector<double> y(n);
    do {
      for (auto& v : y) v = g(rng_);
    } while (norm2(y) < 1e-3);
    return y;
  }
  // Sine-bent segment followed by a straight one, inside the chart.
  CurveSpec random_curve(const FinslerNorm& F) {
    const auto a = random_point(F, 0.15), b = random_point(F, 0.15), c = random_point(F, 0.15);
    std::vector<std::string> comp;
    for (int i = 0; i < F.dim(); ++i) {
      std::ostringstream os;
      os.precision(17);
      os << a[i] << " + (" << (b[i] - a[i]) << ")*t + 0.05*sin(3*t + " << i << ")*t*(1-t)";
      comp.push_back(os.str());
    }
    return presets::from_expressions({comp}).concatenated(presets::polyline({b, c}));
  }
  std::pair<NamedField, NamedField> field_pair(int n) const {
    if (spec_.contains("fields")) {
      const auto f = detail::fields(spec_["fields"], n, {"X", "Y"});
      return {f[0], f[1]};
    }
    return {{"X", coordinate_field(n, 0)}, {"Y", coordinate_field(n, 1)}};
  }

  void metric_check(const FinslerNorm& F);
  void transport(const FinslerNorm& F);
  void holonomy(const FinslerNorm& F);
  void parallelogram(const FinslerNorm& F);
  void curvature(const FinslerNorm& F);
  void closure();
  void chain(const FinslerNorm& F);
  void grouplab();

  const json& spec_;
  const detail::CommandSpec& cmd_;
  std::mt19937_64 rng_;
  std::uint64_t seed_;
  bool parallel_;
  TaskResult& out_;
};

void Task::run() {
  const std::string& c = cmd_.name;
  if (c == "closure") return closure();
  if (c == "grouplab") return grouplab();
  const FinslerNorm F = detail::metric(spec_.at("metric"));
  out_.metric = F.name();
  if (c == "metric-check") return metric_check(F);
  if (c == "transport") return transport(F);
  if (c == "holonomy") return holonomy(F);
  if (c == "parallelogram") return parallelogram(F);
  if (c == "curvature") return curvature(F);
  if (c == "chain") return chain(F);
  throw std::logic_error("unhandled command " + c);
}

void Task::metric_check(const FinslerNorm& F) {
  const int n = F.dim();
  const int count = integer("points", 20);
  const auto lambdas = spec_.contains("lambdas") ? detail::vector(spec_["lambdas"]) : std::vector<double>{0.5, 2, 10};
  double hom = 0, ghom = 0, euler = 0, sym = 0, min_eig = std::numeric_limits<double>::infinity();
  Table table{"points", {}, {}};
  for (const auto& s : bundle_variable_names(n)) table.header.push_back(s);
  for (const char* s : {"homogeneity", "metric_homogeneity", "euler", "min_eigenvalue"}) table.header.push_back(s);
  for (int k = 0; k < count; ++k) {
    const auto x = random_point(F, 0.05);
    const auto y = random_direction(n);
    const double f = F(x, y);
    double h = 0, gh = 0;
    const auto g = metric_tensor(F, x, y);
    for (double lam : lambdas) {
      h = std::max(h, std::abs(F(x, scaled(y, lam)) - lam * f) / (lam * f));
      const auto gl = metric_tensor(F, x, scaled(y, lam));
      gh = std::max(gh, (gl.g - g.g).cwiseAbs().maxCoeff() / g.g.cwiseAbs().maxCoeff());
    }
    const auto s = geodesic_coefficients(F, x, y);
    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
    const double yn = yv.cwiseAbs().maxCoeff();
    double e = (s.Gj * yv - 2.0 * s.G).cwiseAbs().maxCoeff() /
               std::max({2.0 * s.G.cwiseAbs().maxCoeff(), s.Gj.cwiseAbs().maxCoeff() * yn, 1e-300});
    double sy = 0.0;
    for (int i = 0; i < n; ++i) {
      const double scale = std::max({s.Gj.cwiseAbs().maxCoeff(), s.Gjk[i].cwiseAbs().maxCoeff() * yn, 1e-300});
      e = std::max(e, (s.Gjk[i] * yv - s.Gj.row(i).transpose()).cwiseAbs().maxCoeff() / scale);
      sy = std::max(sy, (s.Gjk[i] - s.Gjk[i].transpose()).cwiseAbs().maxCoeff() /
                            std::max(1.0, s.Gjk[i].cwiseAbs().maxCoeff()));
    }
    hom = std::max(hom, h);
    ghom = std::max(ghom, gh);
    euler = std::max(euler, e);
    sym = std::max(sym, sy);
    min_eig = std::min(min_eig, g.min_eigenvalue);
    std::vector<double> row(x);
    row.insert(row.end(), y.begin(), y.end());
    row.insert(row.end(), {h, gh, e, g.min_eigenvalue});
    table.rows.push_back(std::move(row));
  }
  out_.results = {{"points", count},
                  {"lambdas", lambdas},
                  {"max_homogeneity_error", hom},
                  {"max_metric_homogeneity_error", ghom},
                  {"max_euler_error", euler},
                  {"max_symmetry_error", sym},
                  {"min_eigenvalue", min_eig}};
  check("homogeneity", hom, tol("homogeneity"), "<");
  check("metric_homogeneity", ghom, tol("metric_homogeneity"), "<");
  check("euler", euler, tol("euler"), "<");
  check("symmetry", sym, tol("symmetry"), "<");
  check("positive_definite", min_eig, 0.0, ">");
  out_.tables.push_back(std::move(table));
}

void Task::transport(const FinslerNorm& F) {
  std::vector<CurveSpec> curves;
  if (spec_.contains("curve"))
    curves.push_back(detail::curve(spec_["curve"]));
  else
    for (int k = 0, m = integer("random_curves", 20); k < m; ++k) curves.push_back(random_curve(F));
  const auto lambdas = spec_.contains("lambdas") ? detail::vector(spec_["lambdas"]) : std::vector<double>{0.5, 2, 10};
  double drift = 0, hom = 0;
  long flagged = 0;
  Table table{"transport", {"curve", "sample", "relative_drift", "homogeneity", "steps"}, {}};
  json per_curve = json::array();
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const auto start = curves[c].start();
    const auto y0s = spec_.contains("y0") ? std::vector<std::vector<double>>{detail::vector(spec_["y0"])}
                                          : indicatrix_samples(F, start, integer("samples", 2));
    json entry = {{"start", start}, {"end", curves[c].end()}, {"y_end", json::array()}};
    for (std::size_t s = 0; s < y0s.size(); ++s) {
      const auto r = parallel_transport(F, curves[c], y0s[s]);
      const double d = r.norm_drift / F(start, y0s[s]);
      double h = 0.0;
      for (double lam : lambdas) {
        const auto rl = parallel_transport(F, curves[c], scaled(y0s[s], lam));
        h = std::max(h, dist2(rl.y_end, scaled(r.y_end, lam)) / (lam * norm2(r.y_end)));
      }
      drift = std::max(drift, d);
      hom = std::max(hom, h);
      flagged += r.flagged;
      entry["y_end"].push_back(r.y_end);
      table.rows.push_back({double(c), double(s), d, h, double(r.stats.accepted)});
    }
    per_curve.push_back(std::move(entry));
  }
  out_.results = {{"curves", per_curve},
                  {"lambdas", lambdas},
                  {"max_relative_drift", drift},
                  {"max_homogeneity_error", hom},
                  {"flagged", flagged}};
  check("norm", drift, tol("norm"), "<");
  check("homogeneity", hom, tol("homogeneity"), "<");
  check("flagged_transports", double(flagged), 0.0, "<=", true);
  out_.tables.push_back(std::move(table));
}

void Task::holonomy(const FinslerNorm& F) {
  const int n = F.dim();
  const LoopSpec L = detail::loop(spec_["loop"], n);
  const auto p = L.base_point();
  const auto samples = indicatrix_samples(F, p, integer("samples", 8));
  const auto h = holonomy_map(F, L, samples);
  double drift = 0.0;
  json images = json::array(), angles = json::array();
  Table table{"holonomy", {"sample", "angle", "drift"}, {}};
  double angle_err = 0.0;
  const bool has_expected = spec_.contains("expected_angle");
  const double expected = number("expected_angle", 0.0);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    drift = std::max(drift, h[k].norm_drift);
    images.push_back(h[k].y_end);
    double a = std::nan("");
    if (n == 2) {
      a = rotation_angle(F, p, samples[k], h[k].y_end);
      angles.push_back(a);
      angle_err = std::max(angle_err, std::abs(a - expected));
    }
    table.rows.push_back({double(k), a, h[k].norm_drift});
  }
  out_.results = {{"base_point", p}, {"samples", samples}, {"images", images}, {"max_drift", drift}};
  if (n == 2) out_.results["angles"] = angles;
  check("norm", drift, tol("norm"), "<");
  if (has_expected) {
    out_.results["expected_angle"] = expected;
    check("angle", n == 2 ? angle_err : std::nan(""), tol("angle"), "<");
  }
  out_.tables.push_back(std::move(table));
}

void Task::parallelogram(const FinslerNorm& F) {
  const int n = F.dim();
  const auto [X, Y] = field_pair(n);
  const auto p = detail::vector(spec_["p"]);
  const auto ts = spec_.contains("t") ? detail::vector(spec_["t"]) : std::vector<double>{0.05};
  const auto samples = indicatrix_samples(F, p, integer("samples", 4));
  double mismatch = 0.0, drift = 0.0;
  json loops = json::array();
  for (double t : ts) {
    const auto h = parallelogram_holonomy(F, X.field, Y.field, p, t, samples);
    mismatch = std::max(mismatch, h.closure_mismatch);
    for (const auto& y : h.images) drift = std::max(drift, std::abs(F(p, y) - 1.0));
    loops.push_back({{"t", t}, {"images", h.images}, {"closure_mismatch", h.closure_mismatch}});
  }
  out_.results = {{"base_point", p}, {"samples", samples}, {"loops", loops}};
  check("closure", mismatch, tol("closure"), "<");
  check("norm", drift, tol("norm"), "<");
  if (!spec_.value("derivatives", false)) return;

  const jets::StepSchedule schedule{number("h0", 0.08), integer("levels", 4)};
  const auto d = parallelogram_derivatives(F, X.field, Y.field, p, samples, schedule);
  const auto xi = curvature_field(F, X.field, Y.field, p);
  double second = 0.0, first = 0.0;
  bool converged = true;
  json per_sample = json::array();
  Table steps{"derivative_steps", {"sample", "h"}, {}};
  for (int i = 0; i < n; ++i) steps.header.push_back("quotient_" + std::to_string(i + 1));
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto v = xi.at(samples[k]);
    const double scale = std::max(norm2(v), kDerivativeFloor);
    const double e2 = dist2(scaled(d.second[k], 0.5), v) / scale;
    const double e1 = norm2(d.first[k]) / scale;
    second = std::max(second, e2);
    first = std::max(first, e1);
    converged = converged && d.raw_second[k].converged;
    per_sample.push_back({{"xi", v},
                          {"half_second_derivative", scaled(d.second[k], 0.5)},
                          {"first_derivative", d.first[k]},
                          {"second_error", e2},
                          {"first_error", e1}});
    for (const auto& st : d.raw_second[k].steps) {
      std::vector<double> row{double(k), st.h};
      row.insert(row.end(), st.estimate.begin(), st.estimate.end());
      steps.rows.push_back(std::move(row));
    }
  }
  out_.results["derivatives"] = {{"schedule", {{"h0", schedule.h0}, {"levels", schedule.levels}}},
                                 {"relative_floor", kDerivativeFloor},
                                 {"samples", per_sample}};
  check("second_derivative", second, tol("second_derivative"), "<");
  check("first_derivative", first, tol("first_derivative"), "<");
  check("richardson_converged", converged ? 1.0 : 0.0, 1.0, "==", true);
  out_.tables.push_back(std::move(steps));
}

void Task::curvature(const FinslerNorm& F) {
  const int n = F.dim();
  const auto [X, Y] = field_pair(n);
  const auto p = detail::vector(spec_["p"]);
  const auto samples = indicatrix_samples(F, p, integer("samples", 8));
  const auto xi = curvature_field(F, X.field, Y.field, p);
  const auto swapped = curvature_field(F, Y.field, X.field, p);
  Table table{"curvature", {"sample"}, {}};
  for (int i = 0; i < n; ++i) table.header.push_back("y" + std::to_string(i + 1));
  for (int i = 0; i < n; ++i) table.header.push_back("xi" + std::to_string(i + 1));
  json values = json::array();
  double size = 0.0, anti = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto v = xi.at(samples[k]), w = swapped.at(samples[k]);
    size = std::max(size, norm2(v));
    for (int i = 0; i < n; ++i) anti = std::max(anti, std::abs(v[i] + w[i]));
    values.push_back(v);
    std::vector<double> row{double(k)};
    row.insert(row.end(), samples[k].begin(), samples[k].end());
    row.insert(row.end(), v.begin(), v.end());
    table.rows.push_back(std::move(row));
  }
  const double defect = tangency_defect(F, xi, samples, std::max(size, 1e-300));
  anti /= std::max(size, 1e-12);
  out_.results = {{"base_point", p}, {"samples", samples}, {"xi", values}, {"max_norm", size},
                  {"tangency_defect", defect}, {"antisymmetry_error", anti}};
  check("tangency", defect, tol("tangency"), "<");
  check("antisymmetry", anti, tol("antisymmetry"), "<");
  out_.tables.push_back(std::move(table));
}

void Task::closure() {
  const auto& fj = spec_["fields"];
  const int m = static_cast<int>(fj[0].size());
  std::vector<SmoothMap> gens;
  std::vector<std::string> labels;
  for (const auto& f : detail::fields(fj, m)) {
    gens.push_back(f.field);
    labels.push_back(f.label);
  }
  ClosureOptions opt;
  opt.depth = integer("depth", 2);
  opt.tau = number("tau", kDefaultRankTolerance);
  opt.parallel = parallel_;
  if (spec_.contains("points")) {
    opt.points = detail::points(spec_["points"]);
  } else {
    const double box = number("box", 1.0);
    std::uniform_real_distribution<double> u(-box, box);
    for (int k = 0, count = integer("point_count", 8); k < count; ++k) {
      std::vector<double> q(m);
      for (auto& v : q) v = u(rng_);
      opt.points.push_back(std::move(q));
    }
  }
  const auto r = lie_closure(gens, labels, opt);
  out_.results = {{"dimension", m},
                  {"points", opt.points},
                  {"basis", r.span.labels},
                  {"depth_of", r.depth_of},
                  {"rank", to_json(r.rank)},
                  {"trace", to_json(r.trace)}};
  if (spec_.contains("expected_rank")) check("rank", r.rank.rank, spec_["expected_rank"].get<double>(), "==");
  check("sample_stabilized", r.rank.stabilized ? 1.0 : 0.0, 1.0, "==", true);
  check("rank_stable_termination", r.trace.termination == ClosureTrace::Termination::rank_stable ? 1.0 : 0.0, 1.0,
        "==", true);
  Table sv{"singular_values", {"index", "singular_value"}, {}};
  for (std::size_t k = 0; k < r.rank.singular_values.size(); ++k)
    sv.rows.push_back({double(k), r.rank.singular_values[k]});
  out_.tables.push_back(std::move(sv));
}

void Task::chain(const FinslerNorm& F) {
  const int n = F.dim();
  const auto p = detail::vector(spec_["p"]);
  const auto fields = spec_.contains("fields") ? detail::fields(spec_["fields"], n) : coordinate_fields(n);
  GeneratorOptions opt;
  opt.depth = integer("depth", 2);
  opt.points = integer("point_count", 25);
  opt.seed = seed_;
  opt.parallel = parallel_;
  const auto rep = inclusion_chain_report(F, p, opt.depth, fields, opt);
  out_.results = rep.to_json();
  check("inclusion_order", double(rep.rank_ihol - rep.rank_curvature), 0.0, ">=");
  check("ambient_bound", double(rep.ambient_bound - rep.rank_ihol), 0.0, ">=");
  check("ihol_stabilized", rep.ihol.closure.rank.stabilized ? 1.0 : 0.0, 1.0, "==", true);
  for (const auto* g : {&rep.curvature_algebra, &rep.ihol}) {
    Table sv{g == &rep.ihol ? "ihol_singular_values" : "curvature_singular_values", {"index", "singular_value"}, {}};
    for (std::size_t k = 0; k < g->closure.rank.singular_values.size(); ++k)
      sv.rows.push_back({double(k), g->closure.rank.singular_values[k]});
    out_.tables.push_back(std::move(sv));
  }
}

void Task::grouplab() {
  namespace gl = finslab::grouplab;
  using Eigen::MatrixXd;
  const std::string op = spec_["op"].get<std::string>();
  const bool exp_op = op == "exp_iterate";
  auto mat_or = [&](const char* key, MatrixXd fallback) {
    return spec_.contains(key) ? detail::matrix(spec_[key]) : fallback;
  };
  MatrixXd X0(2, 2), Y0(2, 2), M0(2, 2);
  if (exp_op) {
    X0 << 0.3, -0.8, 0.5, 0.1;
    M0 << 0.2, 0.4, -0.6, 0.3;
  } else {
    X0 << 0, 1, 0, 0;
    M0.setZero();
  }
  Y0 << 0, 0, 1, 0;
  const MatrixXd X = mat_or("X", X0), Y = mat_or("Y", Y0), M = mat_or("M", M0);
  const int k = integer("k", 1), l = integer("l", 1);
  auto fact = [](int q) { return std::tgamma(q + 1.0); };
  auto curve_of = [&](const MatrixXd& D, int q) { return gl::exp_curve(D / fact(q), q); };
  auto rel = [](const MatrixXd& a, const MatrixXd& b) {
    return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
  };
  auto mat_json = [](const MatrixXd& A) {
    json rows = json::array();
    for (int i = 0; i < A.rows(); ++i) {
      json row = json::array();
      for (int j = 0; j < A.cols(); ++j) row.push_back(A(i, j));
      rows.push_back(row);
    }
    return rows;
  };
  auto record = [&](const gl::TangentRecord& r) {
    json j = {{"order", r.order ? json(*r.order) : json(nullptr)},
              {"direction", mat_json(r.direction)},
              {"lower_residuals", r.lower_residuals}};
    if (r.error != 0.0) j["extrapolation_error"] = r.error;
    return j;
  };
  const double dtol = tol("direction");
  const bool alternate = spec_.value("constants", std::string("derived")) == "alternate";
  out_.results = {{"op", op}, {"X", mat_json(X)}};

  if (op == "contact") {
    const auto r = gl::order_of_contact(curve_of(X, k), k + 2);
    out_.results["k"] = k;
    out_.results["record"] = record(r);
    check("order", r.order ? *r.order : 0, k, "==");
    check("direction", rel(r.direction, X), dtol, "<");
  } else if (op == "commutator") {
    const auto order = spec_.value("composition", std::string("diffeomorphism")) == "matrix_product"
                           ? gl::CompositionOrder::matrix_product
                           : gl::CompositionOrder::diffeomorphism;
    const auto phi = curve_of(X, k), psi = curve_of(Y, l);
    const MatrixXd mixed = gl::commutator_family(phi, psi, order).mixed_derivative(k, l);
    const MatrixXd expected = order == gl::CompositionOrder::diffeomorphism ? MatrixXd(Y * X - X * Y)
                                                                              : MatrixXd(X * Y - Y * X);
    const auto diag = gl::order_of_contact(gl::commutator_curve(phi, psi, order), k + l + 2);
    const double factor = gl::diagonal_factor(k, l);
    out_.results.update({{"Y", mat_json(Y)},
                         {"k", k},
                         {"l", l},
                         {"composition", order == gl::CompositionOrder::diffeomorphism ? "diffeomorphism"
                                                                                          : "matrix_product"},
                         {"mixed_derivative", mat_json(mixed)},
                         {"expected_mixed", mat_json(expected)},
                         {"diagonal_factor", factor},
                         {"diagonal", record(diag)}});
    check("mixed_derivative", (mixed - expected).cwiseAbs().maxCoeff(), dtol, "<");
    if (expected.cwiseAbs().maxCoeff() == 0.0) {
      check("diagonal_no_contact", diag.order ? 1.0 : 0.0, 0.0, "==");
    } else {
      check("diagonal_order", diag.order ? *diag.order : 0, k + l, "==");
      check("diagonal_direction", rel(diag.direction, factor * mixed), dtol, "<");
    }
  } else if (op == "sum") {
    const int r = std::lcm(k, l);
    const auto which = alternate ? gl::SumConstants::alternate : gl::SumConstants::derived;
    const auto [c1, c2] = gl::sum_constants(k, l, which);
    const auto rec = gl::order_of_contact(gl::sum_curve(curve_of(X, k), curve_of(Y, l), which), r + 1);
    out_.results.update({{"Y", mat_json(Y)},
                         {"k", k},
                         {"l", l},
                         {"r", r},
                         {"constants", alternate ? "alternate" : "derived"},
                         {"c1", c1},
                         {"c2", c2},
                         {"record", record(rec)}});
    check("order", rec.order ? *rec.order : 0, r, "==");
    check("direction", rel(rec.direction, X + Y), dtol, "<");
  } else if (op == "scale") {
    const double lambda = number("lambda", 1.0);
    const auto rec = gl::order_of_contact(gl::scale_curve(curve_of(X, k), lambda), k + 2);
    out_.results.update({{"k", k}, {"lambda", lambda}, {"record", record(rec)}});
    if (lambda == 0.0) {
      check("no_contact", rec.order ? 1.0 : 0.0, 0.0, "==");
    } else {
      check("order", rec.order ? *rec.order : 0, k, "==");
      check("direction", (rec.direction - lambda * X).cwiseAbs().maxCoeff(), dtol, "<");
    }
  } else if (op == "inverse") {
    const auto rec = gl::order_of_contact(gl::inverse_curve(curve_of(X, k)), k + 2);
    out_.results.update({{"k", k}, {"record", record(rec)}});
    check("order", rec.order ? *rec.order : 0, k, "==");
    check("direction", (rec.direction + X).cwiseAbs().maxCoeff(), dtol, "<");
  } else if (op == "reparam") {
    const auto which = alternate ? gl::ReparamConstant::alternate : gl::ReparamConstant::derived;
    const auto rec =
        gl::order_of_contact(gl::weak_tangency_reparam(curve_of(X, k), which), 3, gl::ContactMode::one_sided);
    out_.results.update({{"k", k}, {"constants", alternate ? "alternate" : "derived"}, {"record", record(rec)}});
    check("order", rec.order ? *rec.order : 0, 1, "==");
    check("direction", rel(rec.direction, X), tol("one_sided"), "<");
  } else {
    const double t = number("t", 1.0);
    const auto ns = spec_.contains("n") ? spec_["n"].get<std::vector<int>>() : std::vector<int>{8, 16, 32, 64, 128, 256};
    const auto psi = gl::polynomial_curve({X, M});
    Table series{"exp_iterate", {"n", "error"}, {}};
    json ratios = json::array();
    long increases = 0;
    for (std::size_t i = 0; i < ns.size(); ++i) {
      const auto it = gl::exp_iterate(psi, t, ns[i]);
      series.rows.push_back({double(ns[i]), it.distance});
      if (i > 0) {
        ratios.push_back(series.rows[i - 1][1] / it.distance);
        if (!(it.distance < series.rows[i - 1][1])) ++increases;
      }
    }
    out_.results.update({{"M", mat_json(M)}, {"t", t}, {"n", ns}, {"ratios", ratios}});
    out_.results["errors"] = json::array();
    for (const auto& row : series.rows) out_.results["errors"].push_back(row[1]);
    check("monotone_decrease", double(increases), 0.0, "==");
    out_.tables.push_back(std::move(series));
  }
}

}  // namespace

std::string Table::to_csv() const {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + csv_field(header[i]);
  out += "\r\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_number(row[i]);
    out += "\r\n";
  }
  return out;
}

bool TaskResult::pass(ToleranceProfile profile) const {
  if (!error.empty()) return false;
  for (const auto& c : checks)
    if (!c.pass && (!c.advisory || profile == ToleranceProfile::strict)) return false;
  return true;
}

bool Report::pass() const {
  for (const auto& t : tasks)
    if (!t.pass(profile)) return false;
  return true;
}

json Report::to_json() const {
  json j;
  j["schema"] = kReportSchema;
  j["provenance"] = {{"finslab", kVersion},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                     {"seed", seed},
                     {"tolerance_profile", profile_name(profile)}};
  j["config"] = config;
  j["tasks"] = json::array();
  std::size_t checks = 0, failed = 0, errors = 0;
  for (const auto& t : tasks) {
    json tj = {{"index", t.index}, {"command", t.command}, {"label", t.label}, {"metric", t.metric}};
    tj["status"] = !t.error.empty() ? "error" : (t.pass(profile) ? "pass" : "fail");
    if (!t.error.empty()) {
      tj["error"] = t.error;
      ++errors;
    }
    tj["results"] = t.results;
    tj["checks"] = json::array();
    for (const auto& c : t.checks) {
      tj["checks"].push_back(check_json(c));
      ++checks;
      if (!c.pass && (!c.advisory || profile == ToleranceProfile::strict)) ++failed;
    }
    tj["tables"] = json::array();
    for (const auto& tb : t.tables) tj["tables"].push_back(tb.name);
    j["tasks"].push_back(std::move(tj));
  }
  j["summary"] = {{"tasks", tasks.size()}, {"checks", checks}, {"failed_checks", failed}, {"errors", errors},
                  {"pass", pass()}};
  return j;
}

json Report::timestamps() const { return {{"started", started}, {"finished", finished}}; }

Report run(const json& config, const RunOptions& opt) {
  Report report;
  report.started = iso_now();
  report.config = config;
  report.profile = opt.profile;
  report.seed = opt.seed ? *opt.seed : config.value("seed", std::uint64_t{1});
  const auto specs = detail::tasks_of(config);
  report.tasks.resize(specs.size());
  auto work = [&](std::size_t i) {
    TaskResult& r = report.tasks[i];
    r.index = i;
    r.command = specs[i].at("command").get<std::string>();
    r.label = specs[i].value("label", r.command);
    try {
      Task(specs[i], report.seed + i, opt.parallel, r).run();
    } catch (const std::exception& e) {
      r.error = e.what();
    }
  };
  if (opt.parallel && specs.size() > 1) {
    std::vector<std::future<void>> futures;
    for (std::size_t i = 0; i < specs.size(); ++i) futures.push_back(std::async(std::launch::async, work, i));
    for (auto& f : futures) f.get();
  } else {
    for (std::size_t i = 0; i < specs.size(); ++i) work(i);
  }
  report.finished = iso_now();
  return report;
}

json report_schema() {
  const json number_or_null = {{"type", {"number", "null"}}};
  json check = {{"type", "object"},
                {"required", {"name", "value", "tolerance", "relation", "pass", "advisory"}},
                {"properties",
                 {{"name", {{"type", "string"}}},
                  {"value", number_or_null},
                  {"tolerance", number_or_null},
                  {"relation", {{"enum", {"<", "<=", ">", ">=", "=="}}}},
                  {"pass", {{"type", "boolean"}}},
                  {"advisory", {{"type", "boolean"}}}}}};
  std::vector<std::string> names;
  for (const auto& c : detail::commands()) names.push_back(c.name);
  json task = {{"type", "object"},
               {"required", {"index", "command", "label", "metric", "status", "results", "checks", "tables"}},
               {"properties",
                {{"index", {{"type", "integer"}, {"minimum", 0}}},
                 {"command", {{"enum", names}}},
                 {"label", {{"type", "string"}}},
                 {"metric", {{"type", "string"}}},
                 {"status", {{"enum", {"pass", "fail", "error"}}}},
                 {"error", {{"type", "string"}}},
                 {"results", {{"type", "object"}}},
                 {"checks", {{"type", "array"}, {"items", check}}},
                 {"tables", {{"type", "array"}, {"items", {{"type", "string"}}}}}}}};
  return {{"$schema", "https://json-schema.org/draft/2020-12/schema"},
          {"title", kReportSchema},
          {"type", "object"},
          {"required", {"schema", "provenance", "config", "tasks", "summary"}},
          {"properties",
           {{"schema", {{"const", kReportSchema}}},
            {"provenance",
             {{"type", "object"},
              {"required", {"finslab", "eigen", "nlohmann_json", "seed", "tolerance_profile"}},
              {"properties",
               {{"finslab", {{"type", "string"}}},
                {"eigen", {{"type", "string"}}},
                {"nlohmann_json", {{"type", "string"}}},
                {"seed", {{"type", "integer"}, {"minimum", 0}}},
                {"tolerance_profile", {{"enum", {"default", "strict"}}}}}}}},
            {"config", {{"type", "object"}}},
            {"tasks", {{"type", "array"}, {"items", task}}},
            {"summary",
             {{"type", "object"},
              {"required", {"tasks", "checks", "failed_checks", "errors", "pass"}},
              {"properties",
               {{"tasks", {{"type", "integer"}}},
                {"checks", {{"type", "integer"}}},
                {"failed_checks", {{"type", "integer"}}},
                {"errors", {{"type", "integer"}}},
                {"pass", {{"type", "boolean"}}}}}}}}}};
}

namespace {

// Minimal interpreter for the subset of JSON Schema used by report_schema().
void validate_against(const json& schema, const json& value, const std::string& path, std::vector<std::string>& out) {
  auto fail = [&](const std::string& msg) { out.push_back((path.empty() ? "/" : path) + ": " + msg); };
  if (schema.contains("const") && value != schema["const"]) return fail("expected " + schema["const"].dump());
  if (schema.contains("enum")) {
    bool found = false;
    for (const auto& e : schema["enum"]) found = found || e == value;
    if (!found) return fail("value " + value.dump() + " not in " + schema["enum"].dump());
  }
  if (schema.contains("type")) {
    auto is = [&](const std::string& t) {
      if (t == "object") return value.is_object();
      if (t == "array") return value.is_array();
      if (t == "string") return value.is_string();
      if (t == "boolean") return value.is_boolean();
      if (t == "integer") return value.is_number_integer();
      if (t == "number") return value.is_number();
      if (t == "null") return value.is_null();
      return false;
    };
    bool ok = false;
    if (schema["type"].is_array())
      for (const auto& t : schema["type"]) ok = ok || is(t.get<std::string>());
    else
      ok = is(schema["type"].get<std::string>());
    if (!ok) return fail("expected type " + schema["type"].dump());
  }
  if (schema.contains("minimum") && value.is_number() && value.get<double>() < schema["minimum"].get<double>())
    fail("below minimum");
  if (value.is_object()) {
    if (schema.contains("required"))
      for (const auto& r : schema["required"])
        if (!value.contains(r.get<std::string>())) fail("missing '" + r.get<std::string>() + "'");
    if (schema.contains("properties"))
      for (const auto& [k, sub] : schema["properties"].items())
        if (value.contains(k)) validate_against(sub, value[k], path + "/" + k, out);
  }
  if (value.is_array() && schema.contains("items"))
    for (std::size_t i = 0; i < value.size(); ++i)
      validate_against(schema["items"], value[i], path + "/" + std::to_string(i), out);
}

}  // namespace

std::vector<std::string> validate_report(const json& report) {
  std::vector<std::string> out;
  validate_against(report_schema(), report, "", out);
  if (!out.empty()) return out;
  const auto& tasks = report["tasks"];
  if (report["summary"]["tasks"].get<std::size_t>() != tasks.size()) out.push_back("/summary/tasks: count mismatch");
  std::size_t checks = 0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (tasks[i]["index"].get<std::size_t>() != i) out.push_back("/tasks/" + std::to_string(i) + "/index: out of order");
    checks += tasks[i]["checks"].size();
  }
  if (report["summary"]["checks"].get<std::size_t>() != checks) out.push_back("/summary/checks: count mismatch");
  return out;
}

std::vector<std::filesystem::path> emit(const Report& report, const EmitOptions& opt) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(opt.dir, ec);
  if (ec || !fs::is_directory(opt.dir))
    throw IoError("cannot create output directory '" + opt.dir.string() + "': " + ec.message());
  std::vector<fs::path> written;
  auto write = [&](const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    out.close();
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    written.push_back(path);
  };
  if (opt.json) {
    write(opt.dir / "report.json", report.to_json().dump(2) + "\n");
    write(opt.dir / "report.timestamps.json", report.timestamps().dump(2) + "\n");
  }
  if (opt.csv)
    for (const auto& t : report.tasks)
      for (const auto& tb : t.tables)
        write(opt.dir / (std::to_string(t.index) + "-" + t.command + "-" + tb.name + ".csv"), tb.to_csv());
  return written;
}

std::filesystem::path default_output_dir() {
  if (const char* env = std::getenv(kOutDirVariable); env && *env) return env;
  return std::filesystem::current_path();
}

}  // namespace finslab::cli
