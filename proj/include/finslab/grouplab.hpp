#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "finslab/derivatives.hpp"
#include "finslab/matrix.hpp"
#include "finslab/smooth_map.hpp"

namespace finslab::grouplab {

/// Curve t -> G in GL(n) through the identity; `map` sends t to the n*n
/// entries (row-major) and is jet-evaluable.
class MatrixCurve {
 public:
  MatrixCurve() = default;
  /// Throws std::invalid_argument unless the value at 0 is I within 1e-12.
  MatrixCurve(int n, SmoothMap map, std::optional<int> order = std::nullopt, std::string name = {});

  int n() const { return n_; }
  const SmoothMap& map() const { return map_; }
  std::optional<int> order() const { return order_; }
  const std::string& name() const { return name_; }

  Eigen::MatrixXd operator()(double t) const;
  Mat<Jet> at(const Jet& t) const;

 private:
  int n_ = 0;
  SmoothMap map_;
  std::optional<int> order_;
  std::string name_;
};

/// Evaluator for curves built from jet matrix algebra.
using MatrixFunction = std::function<Mat<Jet>(const Jet& t)>;
MatrixCurve make_curve(int n, MatrixFunction f, std::optional<int> order, std::string name, Box domain = {});

Mat<Jet> to_jet_matrix(const Eigen::MatrixXd& A, const Jet& proto);
Eigen::MatrixXd values(const Mat<Jet>& M);

/// t -> exp(t^k X).
MatrixCurve exp_curve(const Eigen::MatrixXd& X, int k = 1);
/// t -> I + sum_j t^(j+1) A[j].
MatrixCurve polynomial_curve(const std::vector<Eigen::MatrixXd>& A);
MatrixCurve identity_curve(int n);

inline constexpr double kContactTolerance = 1e-9;

struct TangentRecord {
  std::optional<int> order;               // empty: no contact up to max_k
  Eigen::MatrixXd direction;              // k-th derivative at 0
  std::vector<double> lower_residuals;    // max-abs of derivatives 1..k-1
  double error = 0.0;                     // extrapolation residual (finite-difference mode)
};

enum class ContactMode { jet, one_sided };

/// Smallest k <= max_k with a derivative above kContactTolerance (max-abs).
/// one_sided uses forward differences on t >= 0 for curves without jets at 0.
TangentRecord order_of_contact(const MatrixCurve& c, int max_k, ContactMode mode = ContactMode::jet);

/// Which product realizes composition of the group elements.
/// diffeomorphism: (a * b) acts as "b first", i.e. the matrix product b a.
enum class CompositionOrder { diffeomorphism, matrix_product };

struct CommutatorFamily {
  int n = 0;
  SmoothMap map;  // (t, s) -> entries of [phi_t, psi_s]
  CompositionOrder order = CompositionOrder::diffeomorphism;
  Eigen::MatrixXd mixed_derivative(int k, int l) const;
};

/// [phi_t, psi_s] = phi_t^-1 psi_s^-1 phi_t psi_s in the chosen composition order.
CommutatorFamily commutator_family(const MatrixCurve& phi, const MatrixCurve& psi,
                                   CompositionOrder order = CompositionOrder::diffeomorphism);
/// The diagonal t -> [phi_t, psi_t]; its order is found by contact.
MatrixCurve commutator_curve(const MatrixCurve& phi, const MatrixCurve& psi,
                             CompositionOrder order = CompositionOrder::diffeomorphism);
/// (k+l)! / (k! l!): diagonal derivative over mixed derivative.
double diagonal_factor(int k, int l);

enum class SumConstants { derived, alternate };
/// Pair (c1, c2) for orders (k, l).
std::pair<double, double> sum_constants(int k, int l, SumConstants which = SumConstants::derived);
/// phi_{c1 t^{r/k}} psi_{c2 t^{r/l}} with r = lcm(k, l).
MatrixCurve sum_curve(const MatrixCurve& phi, const MatrixCurve& psi, SumConstants which = SumConstants::derived);

MatrixCurve inverse_curve(const MatrixCurve& phi);
/// Direction lambda X: reparametrize by |lambda|^{1/k} t, invert for lambda < 0.
MatrixCurve scale_curve(const MatrixCurve& phi, double lambda);

enum class ReparamConstant { derived, alternate };
/// sigma_t = phi_{(k! t)^{1/k}} (derived) or phi_{k! t^{1/k}} (alternate), t >= 0.
MatrixCurve weak_tangency_reparam(const MatrixCurve& phi, ReparamConstant which = ReparamConstant::derived);

struct ExpIterate {
  Eigen::MatrixXd power;     // psi(t/n)^n
  Eigen::MatrixXd exponential;  // exp(t X), X = psi'(0)
  double distance = 0.0;     // max-abs
};

/// Rejects |t| * |X| above kExpNormLimit.
inline constexpr double kExpNormLimit = 50.0;
ExpIterate exp_iterate(const MatrixCurve& psi, double t, int n);

/// Curve order used by the constructions: declared order, else order_of_contact(c, 12).
int curve_order(const MatrixCurve& c);

}  // namespace finslab::grouplab
