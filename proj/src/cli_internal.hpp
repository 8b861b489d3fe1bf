#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "finslab/cli.hpp"
#include "finslab/curvature.hpp"
#include "finslab/finsler.hpp"
#include "finslab/transport.hpp"

namespace finslab::cli::detail {

enum class Kind {
  number,        // JSON number or constant expression string ("pi/3")
  integer,
  string,
  boolean,
  vector,        // array of numbers
  matrix,        // square array of arrays of numbers
  points,        // array of equal-length vectors
  fields,        // array of component-expression arrays
  number_list,
  integer_list,
  metric,        // catalog key or {expression, dim, chart, riemannian, name}
  curve,         // {polyline} or {expressions}
  loop,          // {rectangle} or {polygon}
  tolerances,    // object over the command's tolerance names
};

struct KeySpec {
  std::string name;
  Kind kind;
  std::string doc;
  std::vector<std::string> choices = {};
  double minimum = -1e300;
};

struct CommandSpec {
  std::string name;
  std::string doc;
  std::vector<KeySpec> keys;
  std::vector<std::string> required;
  bool needs_metric = true;
  std::map<std::string, double> tolerances;
};

const std::vector<CommandSpec>& commands();
const CommandSpec& command(const std::string& name);

/// Task objects of a validated config with the top-level metric inherited.
std::vector<nlohmann::json> tasks_of(const nlohmann::json& config);

double number(const nlohmann::json& j);
std::vector<double> vector(const nlohmann::json& j);
std::vector<std::vector<double>> points(const nlohmann::json& j);
Eigen::MatrixXd matrix(const nlohmann::json& j);
FinslerNorm metric(const nlohmann::json& j);
CurveSpec curve(const nlohmann::json& j);
LoopSpec loop(const nlohmann::json& j, int n);
/// Base fields from component expressions in x1..xn; labels from `labels`,
/// else f1, f2, ...
std::vector<NamedField> fields(const nlohmann::json& j, int n, const std::vector<std::string>& labels = {});

}  // namespace finslab::cli::detail
