#include "finslab/liealg.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <sstream>

namespace finslab {

std::vector<Jet> bracket_jets(std::span<const Jet> A, std::span<const Jet> B) {
  const std::size_t m = A.size();
  if (B.size() != m) throw std::invalid_argument("bracket: fields have different dimensions");
  std::vector<std::vector<Jet>> dA(m), dB(m);  // dX[i][j] = d_j X^i
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      dA[i].push_back(A[i].partial(static_cast<int>(j)));
      dB[i].push_back(B[i].partial(static_cast<int>(j)));
    }
  std::vector<Jet> C;
  for (std::size_t i = 0; i < m; ++i) {
    Jet c = A[0] * dB[i][0] - B[0] * dA[i][0];
    for (std::size_t j = 1; j < m; ++j) c += A[j] * dB[i][j] - B[j] * dA[i][j];
    C.push_back(std::move(c));
  }
  return C;
}

SmoothMap lie_bracket(const SmoothMap& X, const SmoothMap& Y) {
  const int m = X.domain_dim();
  if (X.codomain_dim() != m || Y.domain_dim() != m || Y.codomain_dim() != m)
    throw std::invalid_argument("lie_bracket: both arguments must be vector fields on the same R^m");
  auto expander = [X, Y](std::span<const double> z0, int order) {
    const auto A = X.expand(z0, order + 1);
    const auto B = Y.expand(z0, order + 1);
    return bracket_jets(A, B);
  };
  return SmoothMap::from_expansion(m, m, X.domain(), expander, "[" + X.name() + ", " + Y.name() + "]",
                                   std::max(X.order_overhead(), Y.order_overhead()) + 1);
}

namespace linalg {

SvdResult jacobi_singular_values(const Eigen::MatrixXd& A, double tol, int max_sweeps) {
  // Orthogonalize the columns of the taller orientation.
  Eigen::MatrixXd U = A.rows() >= A.cols() ? A : Eigen::MatrixXd(A.transpose());
  const Eigen::Index k = U.cols();
  SvdResult r;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (Eigen::Index p = 0; p + 1 < k; ++p) {
      for (Eigen::Index q = p + 1; q < k; ++q) {
        const double alpha = U.col(p).squaredNorm();
        const double beta = U.col(q).squaredNorm();
        const double gamma = U.col(p).dot(U.col(q));
        if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        const Eigen::VectorXd up = U.col(p);
        U.col(p) = c * up - s * U.col(q);
        U.col(q) = s * up + c * U.col(q);
      }
    }
    r.sweeps = sweep + 1;
    if (!rotated) break;
  }
  r.singular_values = U.colwise().norm().transpose();
  std::sort(r.singular_values.data(), r.singular_values.data() + r.singular_values.size(), std::greater<>());
  return r;
}

}  // namespace linalg

Eigen::MatrixXd FieldSpan::evaluation_matrix() const { return evaluation_matrix(points); }

Eigen::MatrixXd FieldSpan::evaluation_matrix(const std::vector<std::vector<double>>& pts) const {
  if (fields.empty()) return Eigen::MatrixXd(0, 0);
  std::vector<int> comps = components;
  if (comps.empty())
    for (int i = 0; i < fields[0].codomain_dim(); ++i) comps.push_back(i);
  const Eigen::Index cols = static_cast<Eigen::Index>(pts.size() * comps.size());
  Eigen::MatrixXd M(static_cast<Eigen::Index>(fields.size()), cols);
  for (std::size_t r = 0; r < fields.size(); ++r) {
    Eigen::Index c = 0;
    for (const auto& p : pts) {
      const auto v = fields[r](p);
      for (int k : comps) M(static_cast<Eigen::Index>(r), c++) = v.at(k);
    }
  }
  return M;
}

int rank_from_singular_values(const std::vector<double>& sv, double tau) {
  if (sv.empty() || !(sv[0] > 0.0)) return 0;
  return static_cast<int>(std::count_if(sv.begin(), sv.end(), [&](double s) { return s > tau * sv[0]; }));
}

namespace {

std::vector<double> singular_values_of(const Eigen::MatrixXd& M) {
  if (M.size() == 0) return {};
  const auto s = linalg::jacobi_singular_values(M).singular_values;
  return {s.data(), s.data() + s.size()};
}

}  // namespace

RankReport numerical_rank(const FieldSpan& span, const std::vector<std::vector<double>>& doubled_points, double tau) {
  RankReport r;
  r.tolerance = tau;
  r.points = static_cast<int>(span.points.size());
  r.points_doubled = static_cast<int>(doubled_points.size());
  r.singular_values = singular_values_of(span.evaluation_matrix());
  r.rank = rank_from_singular_values(r.singular_values, tau);
  r.rank_doubled = rank_from_singular_values(singular_values_of(span.evaluation_matrix(doubled_points)), tau);
  r.stabilized = r.rank == r.rank_doubled;
  return r;
}

RankReport numerical_rank(std::vector<SmoothMap> fields, const std::vector<std::vector<double>>& points, double tau) {
  if (fields.empty() || points.empty()) throw std::invalid_argument("numerical_rank: need at least one field and point");
  FieldSpan span;
  span.fields = std::move(fields);
  span.points = points;
  return numerical_rank(span, doubled_sample(points), tau);
}

std::vector<std::vector<double>> doubled_sample(const std::vector<std::vector<double>>& points) {
  auto out = points;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto& a = points[k];
    const auto& b = points[(k + 1) % points.size()];
    std::vector<double> m(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) m[i] = 0.5 * (a[i] + b[i]);
    out.push_back(std::move(m));
  }
  return out;
}

std::string ClosureTrace::termination_name() const {
  return termination == Termination::rank_stable ? "rank-stable" : "depth-limit";
}

namespace {

struct Candidate {
  std::string label;
  std::string left, right;
  bool unary = false;
  SmoothMap field;
  Eigen::RowVectorXd row;
  std::string error;
};

Eigen::RowVectorXd evaluate_row(const SmoothMap& f, const std::vector<std::vector<double>>& pts,
                                const std::vector<int>& comps) {
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(pts.size() * comps.size()));
  Eigen::Index c = 0;
  for (const auto& p : pts) {
    const auto v = f(p);
    for (int k : comps) row(c++) = v.at(k);
  }
  return row;
}

int rank_of(const Eigen::MatrixXd& M, double tau) { return rank_from_singular_values(singular_values_of(M), tau); }

}  // namespace

ClosureResult lie_closure(const std::vector<SmoothMap>& generators, const std::vector<std::string>& labels,
                          const ClosureOptions& opt) {
  if (generators.empty()) throw std::invalid_argument("lie_closure: no generators");
  if (opt.points.empty()) throw std::invalid_argument("lie_closure: no evaluation points");
  std::vector<int> comps = opt.components;
  if (comps.empty())
    for (int i = 0; i < generators[0].codomain_dim(); ++i) comps.push_back(i);

  const auto sample = opt.doubled_points.empty() ? doubled_sample(opt.points) : opt.doubled_points;
  ClosureResult res;
  res.span.points = opt.points;
  res.span.components = opt.components;
  Eigen::MatrixXd M(0, static_cast<Eigen::Index>(sample.size() * comps.size()));
  int rank = 0;

  auto evaluate_all = [&](std::vector<Candidate>& cands) {
    auto work = [&](Candidate& c) {
      try {
        c.row = evaluate_row(c.field, sample, comps);
      } catch (const std::exception& e) {
        c.error = e.what();
      }
    };
    if (opt.parallel && cands.size() > 1) {
      std::vector<std::future<void>> jobs;
      for (auto& c : cands) jobs.push_back(std::async(std::launch::async, [&work, &c] { work(c); }));
      for (auto& j : jobs) j.get();
    } else {
      for (auto& c : cands) work(c);
    }
  };
  auto admit = [&](std::vector<Candidate>& cands, Generation& gen, int depth, std::vector<int>& new_ids) {
    for (auto& c : cands) {
      if (!c.error.empty()) {
        gen.notes.push_back(c.label + ": " + c.error);
        continue;
      }
      Eigen::MatrixXd trial(M.rows() + 1, M.cols());
      trial << M, c.row;
      const int r = rank_of(trial, opt.tau);
      if (r > rank) {
        M = std::move(trial);
        rank = r;
        new_ids.push_back(static_cast<int>(res.span.fields.size()));
        res.span.fields.push_back(c.field.renamed(c.label));
        res.span.labels.push_back(c.label);
        res.depth_of.push_back(depth);
        gen.admitted.push_back(c.label);
        gen.parents.emplace_back(c.left, c.right);
        gen.unary.push_back(c.unary);
      }
    }
    gen.rank_after = rank;
  };

  // generation 0
  std::vector<Candidate> gen0;
  for (std::size_t i = 0; i < generators.size(); ++i) {
    Candidate c;
    c.label = i < labels.size() ? labels[i] : "g" + std::to_string(i + 1);
    c.field = generators[i];
    gen0.push_back(std::move(c));
  }
  evaluate_all(gen0);
  Generation g0;
  g0.candidates = static_cast<int>(gen0.size());
  std::vector<int> frontier;
  admit(gen0, g0, 0, frontier);
  res.trace.generations.push_back(std::move(g0));

  res.trace.termination = ClosureTrace::Termination::depth_limit;
  for (int depth = 1; depth <= opt.depth; ++depth) {
    std::vector<Candidate> cands;
    const int total = static_cast<int>(res.span.fields.size());
    std::vector<bool> in_frontier(total, false);
    for (int id : frontier) in_frontier[id] = true;
    for (int a = 0; a < total; ++a)
      for (int b = a + 1; b < total; ++b) {
        if (!in_frontier[a] && !in_frontier[b]) continue;
        Candidate c;
        c.left = res.span.labels[a];
        c.right = res.span.labels[b];
        c.label = "[" + c.left + ", " + c.right + "]";
        c.field = opt.bracket(res.span.fields[a], res.span.fields[b]);
        cands.push_back(std::move(c));
      }
    for (int id : frontier)
      for (const auto& op : opt.unary) {
        Candidate c;
        c.left = res.span.labels[id];
        c.right = op.name;
        c.unary = true;
        c.label = op.name + "(" + c.left + ")";
        c.field = op.apply(res.span.fields[id]);
        cands.push_back(std::move(c));
      }
    std::sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) { return x.label < y.label; });
    evaluate_all(cands);
    Generation gen;
    gen.candidates = static_cast<int>(cands.size());
    std::vector<int> next;
    admit(cands, gen, depth, next);
    res.trace.generations.push_back(std::move(gen));
    frontier = std::move(next);
    if (frontier.empty()) {
      res.trace.termination = ClosureTrace::Termination::rank_stable;
      break;
    }
  }
  res.rank = numerical_rank(res.span, sample, opt.tau);
  return res;
}

nlohmann::json to_json(const RankReport& r) {
  return {{"rank", r.rank},
          {"tolerance", r.tolerance},
          {"stabilized", r.stabilized},
          {"points", r.points},
          {"rank_doubled", r.rank_doubled},
          {"points_doubled", r.points_doubled},
          {"singular_values", r.singular_values}};
}

nlohmann::json to_json(const ClosureTrace& t) {
  nlohmann::json gens = nlohmann::json::array();
  for (const auto& g : t.generations) {
    nlohmann::json parents = nlohmann::json::array();
    for (std::size_t k = 0; k < g.parents.size(); ++k)
      parents.push_back({{"left", g.parents[k].first},
                         {"right", g.parents[k].second},
                         {"kind", g.unary[k] ? "unary" : "bracket"}});
    gens.push_back({{"admitted", g.admitted},
                    {"parents", parents},
                    {"candidates", g.candidates},
                    {"rank_after", g.rank_after},
                    {"notes", g.notes}});
  }
  return {{"generations", gens}, {"termination", t.termination_name()}};
}

std::string singular_values_csv(const RankReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "index,singular_value\n";
  for (std::size_t i = 0; i < r.singular_values.size(); ++i) os << i << ',' << r.singular_values[i] << '\n';
  return os.str();
}

}  // namespace finslab
