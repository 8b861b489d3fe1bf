#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "finslab/finsler.hpp"
#include "finslab/liealg.hpp"

namespace finslab {

enum class FieldOrigin { curvature, bracket, covariant_derivative, user };
std::string origin_name(FieldOrigin o);

/// Vertical field on the indicatrix bundle near the fiber over p. `components`
/// maps bundle points (x, y) to the n vertical components; it is defined on a
/// neighborhood of the fiber so x-derivatives exist.
struct IndicatrixVectorField {
  std::vector<double> p;
  SmoothMap components;  // 2n -> n
  FieldOrigin origin = FieldOrigin::user;
  std::string label;

  int dim() const { return static_cast<int>(p.size()); }
  /// Components at (p, y).
  std::vector<double> at(std::span<const double> y) const;
};

/// xi(x, y / F(x, y)): the degree-0 radial extension of a vertical field.
SmoothMap radial_extension(const FinslerNorm& F, const SmoothMap& V);

/// Vertical part of [X^h, Y^h], i.e. [X^h, Y^h] - [X, Y]^h, as a map 2n -> n
/// (homogeneous of degree 1 in y).
SmoothMap curvature_components(const FinslerNorm& F, const SmoothMap& X, const SmoothMap& Y);

/// Curvature field at p. With `radial` the components are extended from the
/// indicatrix with degree 0; otherwise the raw degree-1 field is kept.
/// Throws SingularMetricError if the metric degenerates on the fiber over p.
IndicatrixVectorField curvature_field(const FinslerNorm& F, const SmoothMap& X, const SmoothMap& Y,
                                      std::span<const double> p, bool radial = true);

/// [a, b] for vertical fields, radially re-extended.
IndicatrixVectorField vertical_bracket(const FinslerNorm& F, const IndicatrixVectorField& a,
                                       const IndicatrixVectorField& b);

/// (nabla_X xi)^i = X^j (d_j xi^i - G^k_j d_{y^k} xi^i + G^i_jk xi^k).
IndicatrixVectorField berwald_covariant_derivative(const FinslerNorm& F, const IndicatrixVectorField& xi,
                                                   const SmoothMap& X, const std::string& x_label = "X");

/// Max over samples of |xi^i dF/dy^i| / (max(|xi|, scale) |dF/dy|) at (p, y).
/// `scale` keeps fields that vanish up to rounding from reading as untangent.
double tangency_defect(const FinslerNorm& F, const IndicatrixVectorField& xi,
                       const std::vector<std::vector<double>>& samples, double scale = 0.0);

/// Indicatrix points (p, y) with F(p, y) = 1 from the low-discrepancy direction
/// sequence; a larger count extends a smaller one.
std::vector<std::vector<double>> indicatrix_bundle_points(const FinslerNorm& F, std::span<const double> p,
                                                          int count, std::uint64_t seed = 0);

struct GeneratorLogEntry {
  std::string label;
  FieldOrigin origin = FieldOrigin::user;
  std::string left, right;  // bracket parents, or (field, X label) for nabla
  int depth = 0;
};

struct GeneratorSet {
  std::vector<double> p;
  std::vector<IndicatrixVectorField> fields;
  std::vector<GeneratorLogEntry> log;  // one entry per field, same order
  ClosureResult closure;

  /// Construction log plus component values at `samples` (fiber directions y).
  nlohmann::json to_json(const std::vector<std::vector<double>>& samples) const;
};

struct GeneratorOptions {
  int depth = 2;
  double tau = kDefaultRankTolerance;
  int points = 25;  // rank sample; stabilization uses twice as many
  std::uint64_t seed = 0;
  /// Apply nabla_X for these fields as well as brackets.
  bool covariant = true;
  bool parallel = true;
};

/// Named base vector field used to build curvature generators.
struct NamedField {
  std::string label;
  SmoothMap field;
};

/// Coordinate fields d/dx^1 .. d/dx^n with labels "d1".."dn".
std::vector<NamedField> coordinate_fields(int n);

/// Curvature fields R(X^h, Y^h) for all pairs i < j of `fields`, at p.
std::vector<IndicatrixVectorField> curvature_generators(const FinslerNorm& F, std::span<const double> p,
                                                        const std::vector<NamedField>& fields);

/// Generators of the infinitesimal holonomy algebra at p: curvature fields
/// closed under vertical brackets and nabla_X (X from `fields`) up to `depth`
/// applications. With opt.covariant = false this is the curvature algebra.
GeneratorSet ihol_generators(const FinslerNorm& F, std::span<const double> p, const std::vector<NamedField>& fields,
                             const GeneratorOptions& opt = {});

}  // namespace finslab
