#include "finslab/curvature.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "finslab/sampling.hpp"
#include "finslab/transport.hpp"

namespace finslab {
namespace {

Box bundle_box(const FinslerNorm& F) { return F.manifold().chart.times(Box::unbounded(F.dim())); }

void check_vertical(const FinslerNorm& F, const SmoothMap& V, const char* what) {
  const int n = F.dim();
  if (V.domain_dim() != 2 * n || V.codomain_dim() != n)
    throw std::invalid_argument(std::string(what) + ": vertical fields map 2n bundle coordinates to n components");
}

// Rejects fibers where the metric degenerates, probing a ring of directions.
void require_regular_fiber(const FinslerNorm& F, std::span<const double> p) {
  F.manifold().require_inside(p);
  for (const auto& y : sampling::direction_grid(F.dim(), 8)) metric_tensor(F, p, y);
}

}  // namespace

std::string origin_name(FieldOrigin o) {
  switch (o) {
    case FieldOrigin::curvature: return "curvature";
    case FieldOrigin::bracket: return "bracket";
    case FieldOrigin::covariant_derivative: return "covariant-derivative";
    case FieldOrigin::user: return "user";
  }
  return "user";
}

std::vector<double> IndicatrixVectorField::at(std::span<const double> y) const {
  std::vector<double> z(p);
  z.insert(z.end(), y.begin(), y.end());
  return components(z);
}

SmoothMap radial_extension(const FinslerNorm& F, const SmoothMap& V) {
  check_vertical(F, V, "radial_extension");
  const int n = F.dim();
  auto expander = [F, V, n](std::span<const double> z0, int order) {
    auto w = variables(z0, order);
    const Jet f = F(std::span<const Jet>(w));
    for (int i = 0; i < n; ++i) w[n + i] = w[n + i] / f;
    return V(std::span<const Jet>(w));
  };
  return SmoothMap::from_expansion(2 * n, n, bundle_box(F), expander, V.name(),
                                   V.order_overhead() + F.F().order_overhead());
}

SmoothMap curvature_components(const FinslerNorm& F, const SmoothMap& X, const SmoothMap& Y) {
  const int n = F.dim();
  const SmoothMap Xh = horizontal_lift_field(F, X);
  const SmoothMap Yh = horizontal_lift_field(F, Y);
  auto expander = [F, Xh, Yh, n](std::span<const double> z0, int order) {
    const auto C = bracket_jets(Xh.expand(z0, order + 1), Yh.expand(z0, order + 1));
    const auto G = spray_expansion(F, z0, order + 1);
    // vertical part of C: C^{n+k} + G^k_i C^i
    std::vector<Jet> xi;
    for (int k = 0; k < n; ++k) {
      Jet v = C[n + k];
      for (int i = 0; i < n; ++i) v += G[k].partial(n + i) * C[i];
      xi.push_back(std::move(v));
    }
    return xi;
  };
  return SmoothMap::from_expansion(2 * n, n, bundle_box(F), expander, "R(" + X.name() + ", " + Y.name() + ")",
                                   std::max(Xh.order_overhead(), Yh.order_overhead()) + 1);
}

IndicatrixVectorField curvature_field(const FinslerNorm& F, const SmoothMap& X, const SmoothMap& Y,
                                      std::span<const double> p, bool radial) {
  require_regular_fiber(F, p);
  IndicatrixVectorField f;
  f.p.assign(p.begin(), p.end());
  const SmoothMap raw = curvature_components(F, X, Y);
  f.components = radial ? radial_extension(F, raw) : raw;
  f.origin = FieldOrigin::curvature;
  f.label = raw.name();
  return f;
}

IndicatrixVectorField vertical_bracket(const FinslerNorm& F, const IndicatrixVectorField& a,
                                       const IndicatrixVectorField& b) {
  check_vertical(F, a.components, "vertical_bracket");
  check_vertical(F, b.components, "vertical_bracket");
  const int n = F.dim();
  const SmoothMap A = a.components, B = b.components;
  auto expander = [A, B, n](std::span<const double> z0, int order) {
    const auto Aj = A.expand(z0, order + 1);
    const auto Bj = B.expand(z0, order + 1);
    std::vector<Jet> out;
    for (int i = 0; i < n; ++i) {
      Jet s = Jet::constant(0.0, 2 * n, order);
      for (int j = 0; j < n; ++j) s += Aj[j] * Bj[i].partial(n + j) - Bj[j] * Aj[i].partial(n + j);
      out.push_back(std::move(s));
    }
    return out;
  };
  const std::string label = "[" + a.label + ", " + b.label + "]";
  const SmoothMap raw = SmoothMap::from_expansion(2 * n, n, bundle_box(F), expander, label,
                                                  std::max(A.order_overhead(), B.order_overhead()) + 1);
  IndicatrixVectorField f;
  f.p = a.p;
  f.components = radial_extension(F, raw);
  f.origin = FieldOrigin::bracket;
  f.label = label;
  return f;
}

IndicatrixVectorField berwald_covariant_derivative(const FinslerNorm& F, const IndicatrixVectorField& xi,
                                                   const SmoothMap& X, const std::string& x_label) {
  check_vertical(F, xi.components, "berwald_covariant_derivative");
  const int n = F.dim();
  if (X.domain_dim() != n || X.codomain_dim() != n)
    throw std::invalid_argument("berwald_covariant_derivative: X must be a vector field on the chart");
  const SmoothMap V = xi.components;
  auto expander = [F, V, X, n](std::span<const double> z0, int order) {
    const auto G = spray_expansion(F, z0, order + 2);
    const auto v = V.expand(z0, order + 1);
    const auto vars = variables(z0, order);
    const auto Xj = X(std::span<const Jet>(vars.data(), n));
    std::vector<std::vector<Jet>> Gk(n);  // Gk[k][j] = G^k_j at order q + 1
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j) Gk[k].push_back(G[k].partial(n + j));
    std::vector<Jet> out;
    for (int i = 0; i < n; ++i) {
      Jet s = Jet::constant(0.0, 2 * n, order);
      for (int j = 0; j < n; ++j) {
        Jet t = v[i].partial(j);
        for (int k = 0; k < n; ++k) {
          t -= Gk[k][j] * v[i].partial(n + k);
          t += Gk[i][j].partial(n + k) * v[k];
        }
        s += Xj[j] * t;
      }
      out.push_back(std::move(s));
    }
    return out;
  };
  IndicatrixVectorField f;
  f.p = xi.p;
  f.label = "nabla_" + x_label + "(" + xi.label + ")";
  f.components = SmoothMap::from_expansion(
      2 * n, n, bundle_box(F), expander, f.label,
      std::max(V.order_overhead() + 1, 5 + F.F().order_overhead()) + X.order_overhead());
  f.origin = FieldOrigin::covariant_derivative;
  return f;
}

double tangency_defect(const FinslerNorm& F, const IndicatrixVectorField& xi,
                       const std::vector<std::vector<double>>& samples, double scale) {
  const int n = F.dim();
  double worst = 0.0;
  for (const auto& y : samples) {
    std::vector<double> z(xi.p);
    z.insert(z.end(), y.begin(), y.end());
    const Jet f = F.F().expand(z, 1)[0];
    const auto v = xi.components(z);
    double dot = 0.0, nv = 0.0, nf = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = f.partial(n + i).value();
      dot += v[i] * d;
      nv += v[i] * v[i];
      nf += d * d;
    }
    const double denom = std::max(std::sqrt(nv), scale) * std::sqrt(nf);
    if (denom > 0.0) worst = std::max(worst, std::abs(dot) / denom);
  }
  return worst;
}

std::vector<std::vector<double>> indicatrix_bundle_points(const FinslerNorm& F, std::span<const double> p,
                                                          int count, std::uint64_t seed) {
  std::vector<std::vector<double>> out;
  for (const auto& d : sampling::low_discrepancy_directions(F.dim(), count, seed)) {
    std::vector<double> z(p.begin(), p.end());
    const auto y = to_indicatrix(F, p, d);
    z.insert(z.end(), y.begin(), y.end());
    out.push_back(std::move(z));
  }
  return out;
}

std::vector<NamedField> coordinate_fields(int n) {
  std::vector<NamedField> out;
  for (int i = 0; i < n; ++i) out.push_back({"d" + std::to_string(i + 1), coordinate_field(n, i)});
  return out;
}

std::vector<IndicatrixVectorField> curvature_generators(const FinslerNorm& F, std::span<const double> p,
                                                        const std::vector<NamedField>& fields) {
  std::vector<IndicatrixVectorField> out;
  for (std::size_t a = 0; a < fields.size(); ++a)
    for (std::size_t b = a + 1; b < fields.size(); ++b) {
      auto f = curvature_field(F, fields[a].field, fields[b].field, p);
      f.label = "R(" + fields[a].label + ", " + fields[b].label + ")";
      out.push_back(std::move(f));
    }
  return out;
}

GeneratorSet ihol_generators(const FinslerNorm& F, std::span<const double> p, const std::vector<NamedField>& fields,
                             const GeneratorOptions& opt) {
  if (opt.depth < 0) throw std::invalid_argument("ihol_generators: depth must be nonnegative");
  const auto gens = curvature_generators(F, p, fields);
  GeneratorSet set;
  set.p.assign(p.begin(), p.end());
  if (gens.empty()) return set;

  const std::vector<double> base(p.begin(), p.end());
  auto wrap = [&](const SmoothMap& m) {
    IndicatrixVectorField f;
    f.p = base;
    f.components = m;
    f.label = m.name();
    return f;
  };
  ClosureOptions copt;
  copt.depth = opt.depth;
  copt.tau = opt.tau;
  copt.parallel = opt.parallel;
  copt.points = indicatrix_bundle_points(F, p, opt.points, opt.seed);
  copt.doubled_points = indicatrix_bundle_points(F, p, 2 * opt.points, opt.seed);
  copt.bracket = [F, wrap](const SmoothMap& a, const SmoothMap& b) {
    return vertical_bracket(F, wrap(a), wrap(b)).components;
  };
  if (opt.covariant)
    for (const auto& X : fields)
      copt.unary.push_back({"nabla_" + X.label, [F, wrap, X](const SmoothMap& a) {
                              return berwald_covariant_derivative(F, wrap(a), X.field, X.label).components;
                            }});

  std::vector<SmoothMap> maps;
  std::vector<std::string> labels;
  for (const auto& g : gens) {
    maps.push_back(g.components);
    labels.push_back(g.label);
  }
  set.closure = lie_closure(maps, labels, copt);

  std::map<std::string, GeneratorLogEntry> by_label;
  for (std::size_t g = 0; g < set.closure.trace.generations.size(); ++g) {
    const auto& gen = set.closure.trace.generations[g];
    for (std::size_t k = 0; k < gen.admitted.size(); ++k) {
      GeneratorLogEntry e;
      e.label = gen.admitted[k];
      e.left = gen.parents[k].first;
      e.right = gen.parents[k].second;
      e.depth = static_cast<int>(g);
      e.origin = g == 0 ? FieldOrigin::curvature
                        : (gen.unary[k] ? FieldOrigin::covariant_derivative : FieldOrigin::bracket);
      by_label[e.label] = e;
    }
  }
  for (std::size_t i = 0; i < set.closure.span.fields.size(); ++i) {
    const auto& label = set.closure.span.labels[i];
    auto f = wrap(set.closure.span.fields[i]);
    const auto& e = by_label.at(label);
    f.origin = e.origin;
    f.label = label;
    set.fields.push_back(std::move(f));
    set.log.push_back(e);
  }
  return set;
}

nlohmann::json GeneratorSet::to_json(const std::vector<std::vector<double>>& samples) const {
  nlohmann::json j;
  j["base_point"] = p;
  j["samples"] = samples;
  auto& arr = j["fields"] = nlohmann::json::array();
  for (std::size_t i = 0; i < fields.size(); ++i) {
    nlohmann::json f;
    f["label"] = log[i].label;
    f["origin"] = origin_name(log[i].origin);
    f["depth"] = log[i].depth;
    if (!log[i].left.empty()) f["parents"] = {log[i].left, log[i].right};
    auto& vals = f["values"] = nlohmann::json::array();
    for (const auto& y : samples) vals.push_back(fields[i].at(y));
    arr.push_back(std::move(f));
  }
  j["rank"] = finslab::to_json(closure.rank);
  j["trace"] = finslab::to_json(closure.trace);
  return j;
}

}  // namespace finslab
