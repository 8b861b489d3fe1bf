#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "finslab/jet.hpp"

namespace finslab {

/// Axis-aligned box; infinite bounds are allowed.
struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  Box() = default;
  Box(std::vector<double> lo_, std::vector<double> hi_);
  static Box unbounded(int dim);
  static Box interval(double a, double b) { return Box({a}, {b}); }
  /// Cartesian product (this x other).
  Box times(const Box& other) const;

  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(std::span<const double> p) const;
  /// Distance from p to the boundary; negative outside.
  double margin(std::span<const double> p) const;
  bool empty() const;
};

/// A smooth map R^m -> R^k evaluable on jets, valid on an axis-aligned box.
/// Evaluation on a jet whose value part leaves the box is a DomainError.
class SmoothMap {
 public:
  using Evaluator = std::function<std::vector<Jet>(std::span<const Jet>)>;
  /// Taylor expansion at a point: `order`-jets in `domain_dim` fresh variables.
  using Expander = std::function<std::vector<Jet>(std::span<const double>, int)>;

  SmoothMap() = default;
  SmoothMap(int domain_dim, int codomain_dim, Box domain, Evaluator eval, std::string name = {});

  /// Maps whose natural description is a local expansion (fields built from
  /// derivatives of other maps). Jet inputs are handled by composition.
  /// `order_overhead` is how many derivative orders beyond the requested one
  /// the expander consumes; it drives the jet-order exhaustion diagnostic.
  static SmoothMap from_expansion(int domain_dim, int codomain_dim, Box domain, Expander expand,
                                  std::string name, int order_overhead);

  static SmoothMap constant(std::vector<double> value, int domain_dim, Box domain, std::string name = {});
  static SmoothMap zero(int domain_dim, int codomain_dim, Box domain);

  int domain_dim() const;
  int codomain_dim() const;
  const Box& domain() const;
  const std::string& name() const;
  int order_overhead() const;
  bool valid() const { return static_cast<bool>(impl_); }

  std::vector<Jet> operator()(std::span<const Jet> z) const;
  std::vector<double> operator()(std::span<const double> z) const;
  std::vector<double> operator()(std::initializer_list<double> z) const {
    return (*this)(std::span<const double>(z.begin(), z.size()));
  }
  /// Jets in `domain_dim` variables around z0.
  std::vector<Jet> expand(std::span<const double> z0, int order) const;

  SmoothMap renamed(std::string name) const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
  void check_domain(std::span<const double> z) const;
};

}  // namespace finslab
