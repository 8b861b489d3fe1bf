#include "finslab/inclusion_chain.hpp"

#include <algorithm>
#include <cmath>

namespace finslab {

InclusionChainReport inclusion_chain_report(const FinslerNorm& F, std::span<const double> p, int depth,
                                            const std::vector<NamedField>& fields, const GeneratorOptions& opt) {
  InclusionChainReport r;
  r.p.assign(p.begin(), p.end());
  r.depth = depth;
  GeneratorOptions o = opt;
  o.depth = depth;
  o.covariant = false;
  r.curvature_algebra = ihol_generators(F, p, fields, o);
  o.covariant = true;
  r.ihol = ihol_generators(F, p, fields, o);
  r.rank_curvature = r.curvature_algebra.closure.rank.rank;
  r.rank_ihol = r.ihol.closure.rank.rank;
  r.ambient_bound = opt.points * F.dim();

  const auto gens = curvature_generators(F, p, fields);
  const auto pts = indicatrix_bundle_points(F, p, opt.points, opt.seed);
  for (std::size_t a = 0; a < gens.size(); ++a)
    for (std::size_t b = a + 1; b < gens.size(); ++b) {
      const auto br = vertical_bracket(F, gens[a], gens[b]);
      for (const auto& z : pts)
        for (double v : br.components(z)) r.max_curvature_bracket = std::max(r.max_curvature_bracket, std::abs(v));
    }
  return r;
}

InclusionChainReport inclusion_chain_report(const FinslerNorm& F, std::span<const double> p, int depth) {
  return inclusion_chain_report(F, p, depth, coordinate_fields(F.dim()));
}

nlohmann::json InclusionChainReport::to_json() const {
  return {{"base_point", p},
          {"depth", depth},
          {"rank_curvature_algebra", rank_curvature},
          {"rank_ihol", rank_ihol},
          {"ambient_bound", ambient_bound},
          {"ordered", ordered()},
          {"max_curvature_bracket", max_curvature_bracket},
          {"holonomy_algebra", holonomy_status},
          {"curvature_algebra", {{"rank", finslab::to_json(curvature_algebra.closure.rank)},
                                 {"trace", finslab::to_json(curvature_algebra.closure.trace)}}},
          {"ihol", {{"rank", finslab::to_json(ihol.closure.rank)}, {"trace", finslab::to_json(ihol.closure.trace)}}}};
}

}  // namespace finslab
