#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "finslab/smooth_map.hpp"

namespace finslab {

/// [X, Y]^i = X^j d_j Y^i - Y^j d_j X^i for fields R^m -> R^m. The result is
/// jet-evaluable and consumes one derivative order of each argument.
SmoothMap lie_bracket(const SmoothMap& X, const SmoothMap& Y);

/// Same on jets: A, B are order q+1 expansions in the m coordinates; returns order q.
std::vector<Jet> bracket_jets(std::span<const Jet> A, std::span<const Jet> B);

namespace linalg {

struct SvdResult {
  Eigen::VectorXd singular_values;  // descending
  int sweeps = 0;
};

/// One-sided Jacobi SVD (singular values only).
SvdResult jacobi_singular_values(const Eigen::MatrixXd& A, double tol = 1e-15, int max_sweeps = 60);

}  // namespace linalg

/// Fields sampled at points: row r holds field r evaluated at every point,
/// components concatenated (points * components columns).
struct FieldSpan {
  std::vector<SmoothMap> fields;
  std::vector<std::string> labels;
  std::vector<std::vector<double>> points;
  /// Selects which output components enter the matrix (empty: all).
  std::vector<int> components;

  Eigen::MatrixXd evaluation_matrix() const;
  Eigen::MatrixXd evaluation_matrix(const std::vector<std::vector<double>>& pts) const;
};

inline constexpr double kDefaultRankTolerance = 1e-7;

struct RankReport {
  std::vector<double> singular_values;  // descending, with the sample used for `rank`
  double tolerance = kDefaultRankTolerance;
  int rank = 0;
  bool stabilized = false;
  int points = 0;            // sample size behind `rank`
  int rank_doubled = 0;      // rank on the doubled sample
  int points_doubled = 0;
};

/// Count of singular values above tau * (largest singular value).
int rank_from_singular_values(const std::vector<double>& sv, double tau);

/// Rank on `points`, re-checked on `doubled_points` (which should extend
/// `points`); stabilized iff both ranks agree.
RankReport numerical_rank(const FieldSpan& span, const std::vector<std::vector<double>>& doubled_points,
                          double tau = kDefaultRankTolerance);
/// Rank on `points`, re-checked on doubled_sample(points).
RankReport numerical_rank(std::vector<SmoothMap> fields, const std::vector<std::vector<double>>& points,
                          double tau = kDefaultRankTolerance);

/// `points` followed by the midpoints of cyclically consecutive points.
/// Stays inside any convex domain; callers on non-convex sets pass their own doubling.
std::vector<std::vector<double>> doubled_sample(const std::vector<std::vector<double>>& points);

/// A unary field operator offered to the closure (e.g. a covariant derivative).
struct UnaryOperator {
  std::string name;
  std::function<SmoothMap(const SmoothMap&)> apply;
};

struct ClosureOptions {
  int depth = 2;
  double tau = kDefaultRankTolerance;
  std::vector<std::vector<double>> points;
  /// Stabilization sample; should extend `points`. Empty: doubled_sample(points).
  /// Admission decisions use this larger sample.
  std::vector<std::vector<double>> doubled_points;
  std::vector<int> components;
  std::function<SmoothMap(const SmoothMap&, const SmoothMap&)> bracket = lie_bracket;
  std::vector<UnaryOperator> unary;
  bool parallel = true;
};

struct Generation {
  std::vector<std::string> admitted;  // labels of admitted fields
  /// (left, right) for brackets; (operand, operator name) for unary images.
  std::vector<std::pair<std::string, std::string>> parents;
  std::vector<bool> unary;
  int candidates = 0;
  int rank_after = 0;
  std::vector<std::string> notes;  // truncations (jet order exhausted, domain errors)
};

struct ClosureTrace {
  std::vector<Generation> generations;  // generation 0 = generators
  enum class Termination { rank_stable, depth_limit } termination = Termination::depth_limit;
  std::string termination_name() const;
};

struct ClosureResult {
  FieldSpan span;       // admitted fields (a basis of the explored span)
  std::vector<int> depth_of;  // generation of each admitted field
  ClosureTrace trace;
  RankReport rank;
};

/// Breadth-first closure. Generation g forms brackets of every pair with at
/// least one member from generation g-1 (and unary images of generation g-1);
/// candidates are evaluated concurrently and admitted in lexicographic label
/// order when they raise the numerical rank.
ClosureResult lie_closure(const std::vector<SmoothMap>& generators, const std::vector<std::string>& labels,
                          const ClosureOptions& opt);

nlohmann::json to_json(const RankReport& r);
nlohmann::json to_json(const ClosureTrace& t);
/// "index,singular_value" rows, descending.
std::string singular_values_csv(const RankReport& r);

}  // namespace finslab
