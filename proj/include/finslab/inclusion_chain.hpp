#pragma once

#include <string>
#include <vector>

#include "finslab/curvature.hpp"

namespace finslab {

/// Ranks along curvature algebra <= infinitesimal holonomy algebra at p.
struct InclusionChainReport {
  std::vector<double> p;
  int depth = 0;
  GeneratorSet curvature_algebra;  // brackets only
  GeneratorSet ihol;               // brackets and nabla
  int rank_curvature = 0;
  int rank_ihol = 0;
  /// Columns of the evaluation matrix: no rank can exceed this.
  int ambient_bound = 0;
  /// Largest component of [xi_a, xi_b] over curvature generators and samples.
  double max_curvature_bracket = 0.0;
  std::string holonomy_status = "not directly computable";
  bool ordered() const { return rank_curvature <= rank_ihol && rank_ihol <= ambient_bound; }

  nlohmann::json to_json() const;
};

InclusionChainReport inclusion_chain_report(const FinslerNorm& F, std::span<const double> p, int depth,
                                            const std::vector<NamedField>& fields, const GeneratorOptions& opt = {});
/// Coordinate fields as the generating family.
InclusionChainReport inclusion_chain_report(const FinslerNorm& F, std::span<const double> p, int depth = 2);

}  // namespace finslab
