#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cli_internal.hpp"
#include "finslab/expression.hpp"

namespace finslab::cli {

using nlohmann::json;
using detail::Kind;

namespace {

std::string join_messages(const std::vector<ConfigIssue>& issues) {
  std::ostringstream os;
  for (std::size_t i = 0; i < issues.size(); ++i) {
    if (i) os << "\n";
    if (issues[i].line > 0) os << "line " << issues[i].line << ": ";
    os << (issues[i].pointer.empty() ? std::string("(document)") : issues[i].pointer) << ": " << issues[i].message;
  }
  return os.str();
}

}  // namespace

ConfigError::ConfigError(std::vector<ConfigIssue> issues)
    : std::runtime_error(join_messages(issues)), issues_(std::move(issues)) {}

ToleranceProfile parse_profile(const std::string& name) {
  if (name == "default") return ToleranceProfile::standard;
  if (name == "strict") return ToleranceProfile::strict;
  throw std::invalid_argument("unknown tolerance profile '" + name + "' (expected default or strict)");
}

std::string profile_name(ToleranceProfile p) { return p == ToleranceProfile::strict ? "strict" : "default"; }

namespace detail {

const std::vector<CommandSpec>& commands() {
  static const std::vector<CommandSpec> specs = [] {
    const KeySpec fields{"fields", Kind::fields, "base vector fields as component expressions in x1..xn"};
    const KeySpec p{"p", Kind::vector, "base point inside the chart"};
    const KeySpec samples{"samples", Kind::integer, "indicatrix samples per fiber", {}, 1};
    const KeySpec lambdas{"lambdas", Kind::number_list, "positive factors for homogeneity checks"};
    return std::vector<CommandSpec>{
        {"metric-check",
         "homogeneity, positive definiteness and Euler identities at random bundle points",
         {{"points", Kind::integer, "random bundle points", {}, 1}, lambdas},
         {},
         true,
         {{"homogeneity", 1e-10}, {"metric_homogeneity", 1e-8}, {"euler", 1e-8}, {"symmetry", 1e-10}}},
        {"transport",
         "parallel transport: norm preservation and positive homogeneity",
         {{"curve", Kind::curve, "explicit curve; random curves are used when absent"},
          {"random_curves", Kind::integer, "number of random curves", {}, 1},
          {"y0", Kind::vector, "initial vector; indicatrix samples when absent"},
          samples,
          lambdas},
         {},
         true,
         {{"norm", 1e-8}, {"homogeneity", 1e-8}}},
        {"holonomy",
         "holonomy map of a loop on indicatrix samples at its base point",
         {{"loop", Kind::loop, "closed curve"},
          samples,
          {"expected_angle", Kind::number, "expected rotation angle (n = 2)"}},
         {"loop"},
         true,
         {{"norm", 1e-8}, {"angle", 1e-6}}},
        {"parallelogram",
         "holonomy of the flow parallelogram of two fields, optionally its t-derivatives against curvature",
         {p,
          fields,
          {"t", Kind::number_list, "loop scales"},
          samples,
          {"derivatives", Kind::boolean, "compare d2/dt2 h_t(v) with twice the curvature field"},
          {"h0", Kind::number, "largest step of the derivative schedule", {}, 1e-12},
          {"levels", Kind::integer, "Richardson levels", {}, 2}},
         {"p"},
         true,
         {{"closure", 1e-9}, {"norm", 1e-8}, {"second_derivative", 1e-4}, {"first_derivative", 1e-6}}},
        {"curvature",
         "curvature field of two base fields at p on indicatrix samples",
         {p, fields, samples},
         {"p"},
         true,
         {{"tangency", 1e-8}, {"antisymmetry", 1e-10}}},
        {"closure",
         "Lie closure of polynomial or analytic fields on R^m",
         {{"fields", Kind::fields, "generators as component expressions in x1..xm"},
          {"depth", Kind::integer, "bracket generations", {}, 0},
          {"tau", Kind::number, "relative singular value threshold", {}, 1e-300},
          {"points", Kind::points, "sample points; random when absent"},
          {"point_count", Kind::integer, "random sample size", {}, 1},
          {"box", Kind::number, "random points lie in [-box, box]^m", {}, 1e-300},
          {"expected_rank", Kind::integer, "rank to check against", {}, 0}},
         {"fields"},
         false,
         {}},
        {"chain",
         "ranks of the curvature algebra and the infinitesimal holonomy algebra at p",
         {p,
          fields,
          {"depth", Kind::integer, "closure depth", {}, 0},
          {"point_count", Kind::integer, "indicatrix points for ranks (doubled for stabilization)", {}, 1}},
         {"p"},
         true,
         {}},
        {"grouplab",
         "matrix-group constructions on curves exp(t^k X / k!), whose k-th derivative at 0 is X",
         {{"op", Kind::string, "construction",
           {"contact", "commutator", "sum", "scale", "inverse", "reparam", "exp_iterate"}},
          {"k", Kind::integer, "order of the first curve", {}, 1},
          {"l", Kind::integer, "order of the second curve", {}, 1},
          {"X", Kind::matrix, "direction of the first curve"},
          {"Y", Kind::matrix, "direction of the second curve"},
          {"M", Kind::matrix, "second-order term of psi_t = I + tX + t^2 M (exp_iterate)"},
          {"lambda", Kind::number, "scale factor"},
          {"constants", Kind::string, "sum and reparametrization constants", {"derived", "alternate"}},
          {"composition", Kind::string, "commutator composition order", {"diffeomorphism", "matrix_product"}},
          {"t", Kind::number, "exp_iterate time"},
          {"n", Kind::integer_list, "exp_iterate powers"}},
         {"op"},
         false,
         {{"direction", 1e-9}, {"one_sided", 1e-6}}},
    };
  }();
  return specs;
}

const CommandSpec& command(const std::string& name) {
  for (const auto& c : commands())
    if (c.name == name) return c;
  throw std::invalid_argument("unknown command '" + name + "'");
}

double number(const json& j) {
  if (j.is_number()) return j.get<double>();
  return Expression::parse(j.get<std::string>(), {})(std::span<const double>());
}

std::vector<double> vector(const json& j) {
  std::vector<double> v;
  for (const auto& e : j) v.push_back(number(e));
  return v;
}

std::vector<std::vector<double>> points(const json& j) {
  std::vector<std::vector<double>> out;
  for (const auto& e : j) out.push_back(vector(e));
  return out;
}

Eigen::MatrixXd matrix(const json& j) {
  const auto rows = points(j);
  const int n = static_cast<int>(rows.size());
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) A(i, k) = rows[i][k];
  return A;
}

FinslerNorm metric(const json& j) {
  if (j.is_string()) return catalog::by_name(j.get<std::string>());
  const int n = j.at("dim").get<int>();
  const Box chart(vector(j.at("chart").at("lo")), vector(j.at("chart").at("hi")));
  return metric_from_expression(j.at("expression").get<std::string>(), n, chart, j.value("name", "custom"),
                                j.value("riemannian", false));
}

CurveSpec curve(const json& j) {
  if (j.contains("polyline")) return presets::polyline(points(j.at("polyline")));
  std::vector<std::vector<std::string>> pieces;
  for (const auto& piece : j.at("expressions")) pieces.push_back(piece.get<std::vector<std::string>>());
  return presets::from_expressions(pieces);
}

LoopSpec loop(const json& j, int n) {
  if (j.contains("polygon")) return presets::polygon(points(j.at("polygon")));
  const auto& r = j.at("rectangle");
  const auto a = vector(r.at("a")), b = vector(r.at("b"));
  const int i = r.value("i", 0), k = r.value("j", 1);
  std::vector<double> base = r.contains("base") ? vector(r.at("base")) : std::vector<double>(n, 0.0);
  base[i] = a[0];
  base[k] = b[0];
  return presets::rectangle(base, i, k, a[0], a[1], b[0], b[1]);
}

std::vector<NamedField> fields(const json& j, int n, const std::vector<std::string>& labels) {
  std::vector<NamedField> out;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const std::string label = k < labels.size() ? labels[k] : "f" + std::to_string(k + 1);
    out.push_back({label, expression_map(j[k].get<std::vector<std::string>>(), base_variable_names(n),
                                         Box::unbounded(n), label)});
  }
  return out;
}

std::vector<json> tasks_of(const json& config) {
  std::vector<json> out;
  if (config.contains("tasks")) {
    for (auto t : config.at("tasks")) {
      if (!t.contains("metric") && config.contains("metric")) t["metric"] = config["metric"];
      out.push_back(std::move(t));
    }
    return out;
  }
  json t = config;
  t.erase("seed");
  out.push_back(std::move(t));
  return out;
}

}  // namespace detail

namespace {

using detail::CommandSpec;
using detail::KeySpec;

std::string escape_pointer_token(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~')
      out += "~0";
    else if (c == '/')
      out += "~1";
    else
      out += c;
  }
  return out;
}

// JSON pointer -> source line of the key (or array element) that introduces it.
class LineIndex {
 public:
  explicit LineIndex(const std::string& text) : s_(text) {
    try {
      value("");
    } catch (...) {
      // malformed input is reported by the parser itself
    }
  }

  int line_of(std::string pointer) const {
    while (true) {
      if (auto it = lines_.find(pointer); it != lines_.end()) return it->second;
      if (pointer.empty()) return 0;
      pointer.erase(pointer.rfind('/'));
    }
  }

 private:
  void ws() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) {
      if (s_[i_] == '\n') ++line_;
      ++i_;
    }
  }

  std::string string_token() {
    std::string out;
    ++i_;
    while (i_ < s_.size() && s_[i_] != '"') {
      if (s_[i_] == '\\') ++i_;
      if (i_ < s_.size()) out += s_[i_++];
    }
    ++i_;
    return out;
  }

  void value(const std::string& ptr) {
    ws();
    lines_.emplace(ptr, line_);
    if (i_ >= s_.size()) return;
    const char c = s_[i_];
    if (c == '{') {
      ++i_;
      while (true) {
        ws();
        if (i_ >= s_.size() || s_[i_] == '}') break;
        const int key_line = line_;
        const std::string child = ptr + "/" + escape_pointer_token(string_token());
        lines_.emplace(child, key_line);
        ws();
        ++i_;  // ':'
        value(child);
        ws();
        if (i_ < s_.size() && s_[i_] == ',') ++i_;
      }
      ++i_;
    } else if (c == '[') {
      ++i_;
      for (int k = 0;; ++k) {
        ws();
        if (i_ >= s_.size() || s_[i_] == ']') break;
        value(ptr + "/" + std::to_string(k));
        ws();
        if (i_ < s_.size() && s_[i_] == ',') ++i_;
      }
      ++i_;
    } else if (c == '"') {
      string_token();
    } else {
      while (i_ < s_.size() && std::string_view(",]} \t\r\n").find(s_[i_]) == std::string_view::npos) ++i_;
    }
  }

  const std::string& s_;
  std::size_t i_ = 0;
  int line_ = 1;
  std::map<std::string, int> lines_;
};

class Validator {
 public:
  explicit Validator(const std::string& text) : index_(text) {}

  void issue(const std::string& pointer, const std::string& message) {
    issues_.push_back({pointer, index_.line_of(pointer), message});
  }
  std::vector<ConfigIssue>& issues() { return issues_; }

  bool is_number(const json& j, const std::string& ptr) {
    if (j.is_number()) return true;
    if (j.is_string()) {
      try {
        detail::number(j);
        return true;
      } catch (const std::exception& e) {
        issue(ptr, std::string("invalid constant expression: ") + e.what());
        return false;
      }
    }
    issue(ptr, "expected a number or a constant expression string");
    return false;
  }

  bool is_vector(const json& j, const std::string& ptr, int size = -1) {
    if (!j.is_array() || j.empty()) {
      issue(ptr, "expected a nonempty array of numbers");
      return false;
    }
    bool ok = true;
    for (std::size_t k = 0; k < j.size(); ++k) ok = is_number(j[k], ptr + "/" + std::to_string(k)) && ok;
    if (ok && size >= 0 && static_cast<int>(j.size()) != size) {
      issue(ptr, "expected " + std::to_string(size) + " components, got " + std::to_string(j.size()));
      return false;
    }
    return ok;
  }

  bool is_points(const json& j, const std::string& ptr, int size = -1) {
    if (!j.is_array() || j.empty()) {
      issue(ptr, "expected a nonempty array of points");
      return false;
    }
    bool ok = true;
    const int m = j[0].is_array() ? static_cast<int>(j[0].size()) : -1;
    for (std::size_t k = 0; k < j.size(); ++k)
      ok = is_vector(j[k], ptr + "/" + std::to_string(k), size >= 0 ? size : m) && ok;
    return ok;
  }

  bool is_fields(const json& j, const std::string& ptr, int n) {
    if (!j.is_array() || j.empty()) {
      issue(ptr, "expected a nonempty array of fields");
      return false;
    }
    bool ok = true;
    const int m = n > 0 ? n : (j[0].is_array() ? static_cast<int>(j[0].size()) : 0);
    for (std::size_t k = 0; k < j.size(); ++k) {
      const std::string fp = ptr + "/" + std::to_string(k);
      const auto& f = j[k];
      if (!f.is_array() || static_cast<int>(f.size()) != m || m == 0) {
        issue(fp, "expected " + std::to_string(m) + " component expressions");
        ok = false;
        continue;
      }
      for (std::size_t c = 0; c < f.size(); ++c) {
        const std::string cp = fp + "/" + std::to_string(c);
        if (!f[c].is_string() && !f[c].is_number()) {
          issue(cp, "expected an expression string");
          ok = false;
          continue;
        }
        try {
          Expression::parse(f[c].is_string() ? f[c].get<std::string>() : f[c].dump(), base_variable_names(m));
        } catch (const std::exception& e) {
          issue(cp, std::string("invalid expression: ") + e.what());
          ok = false;
        }
      }
    }
    return ok;
  }

  // Returns the metric dimension, or 0 when the metric is invalid.
  int metric(const json& j, const std::string& ptr) {
    if (j.is_string()) {
      const auto names = catalog::names();
      try {
        return catalog::by_name(j.get<std::string>()).dim();
      } catch (const std::exception&) {
        std::string list;
        for (const auto& s : names) list += (list.empty() ? "" : ", ") + s;
        issue(ptr, "unknown catalog metric '" + j.get<std::string>() + "' (known: " + list + ")");
        return 0;
      }
    }
    if (!j.is_object()) {
      issue(ptr, "expected a catalog key or an expression metric object");
      return 0;
    }
    unknown_keys(j, ptr, {"expression", "dim", "chart", "riemannian", "name"});
    bool ok = true;
    for (const char* key : {"expression", "dim", "chart"})
      if (!j.contains(key)) {
        issue(ptr, std::string("missing required key '") + key + "'");
        ok = false;
      }
    if (!ok) return 0;
    if (!j["dim"].is_number_integer() || j["dim"].get<int>() < 2 || j["dim"].get<int>() > 4) {
      issue(ptr + "/dim", "expected an integer in 2..4");
      return 0;
    }
    const int n = j["dim"].get<int>();
    const auto& chart = j["chart"];
    if (!chart.is_object()) {
      issue(ptr + "/chart", "expected {lo, hi}");
      return 0;
    }
    unknown_keys(chart, ptr + "/chart", {"lo", "hi"});
    if (!chart.contains("lo") || !chart.contains("hi")) {
      issue(ptr + "/chart", "expected {lo, hi}");
      return 0;
    }
    ok = is_vector(chart["lo"], ptr + "/chart/lo", n);
    ok = is_vector(chart["hi"], ptr + "/chart/hi", n) && ok;
    if (j.contains("riemannian") && !j["riemannian"].is_boolean()) {
      issue(ptr + "/riemannian", "expected a boolean");
      ok = false;
    }
    if (j.contains("name") && !j["name"].is_string()) {
      issue(ptr + "/name", "expected a string");
      ok = false;
    }
    if (!j["expression"].is_string()) {
      issue(ptr + "/expression", "expected an expression string");
      return 0;
    }
    if (!ok) return 0;
    try {
      detail::metric(j);
    } catch (const std::exception& e) {
      issue(ptr, std::string("invalid metric: ") + e.what());
      return 0;
    }
    return n;
  }

  void curve(const json& j, const std::string& ptr, int n) {
    if (!j.is_object() || j.size() != 1 || !(j.contains("polyline") || j.contains("expressions"))) {
      issue(ptr, "expected exactly one of {polyline: points} or {expressions: [[component expressions in t]]}");
      return;
    }
    if (j.contains("polyline")) {
      if (is_points(j["polyline"], ptr + "/polyline", n) && j["polyline"].size() < 2)
        issue(ptr + "/polyline", "expected at least two vertices");
      return;
    }
    const auto& pieces = j["expressions"];
    if (!pieces.is_array() || pieces.empty()) {
      issue(ptr + "/expressions", "expected a nonempty array of pieces");
      return;
    }
    for (std::size_t k = 0; k < pieces.size(); ++k) {
      const std::string pp = ptr + "/expressions/" + std::to_string(k);
      if (!pieces[k].is_array() || (n > 0 && static_cast<int>(pieces[k].size()) != n)) {
        issue(pp, "expected " + std::to_string(n) + " component expressions in t");
        continue;
      }
      for (std::size_t c = 0; c < pieces[k].size(); ++c) {
        try {
          Expression::parse(pieces[k][c].get<std::string>(), {"t"});
        } catch (const std::exception& e) {
          issue(pp + "/" + std::to_string(c), std::string("invalid expression: ") + e.what());
        }
      }
    }
    if (issues_.empty()) {
      try {
        detail::curve(j);
      } catch (const std::exception& e) {
        issue(ptr, std::string("invalid curve: ") + e.what());
      }
    }
  }

  void loop(const json& j, const std::string& ptr, int n) {
    if (!j.is_object() || j.size() != 1 || !(j.contains("rectangle") || j.contains("polygon"))) {
      issue(ptr, "expected exactly one of {rectangle: {a, b, i, j, base}} or {polygon: points}");
      return;
    }
    if (j.contains("polygon")) {
      if (is_points(j["polygon"], ptr + "/polygon", n) && j["polygon"].size() < 3)
        issue(ptr + "/polygon", "expected at least three vertices");
      return;
    }
    const auto& r = j["rectangle"];
    const std::string rp = ptr + "/rectangle";
    if (!r.is_object()) {
      issue(rp, "expected an object");
      return;
    }
    unknown_keys(r, rp, {"a", "b", "i", "j", "base"});
    for (const char* key : {"a", "b"}) {
      if (!r.contains(key))
        issue(rp, std::string("missing required key '") + key + "'");
      else
        is_vector(r[key], rp + "/" + key, 2);
    }
    for (const char* key : {"i", "j"})
      if (r.contains(key) && (!r[key].is_number_integer() || r[key].get<int>() < 0 || r[key].get<int>() >= n))
        issue(rp + "/" + key, "expected a coordinate index in 0.." + std::to_string(n - 1));
    if (r.contains("base")) is_vector(r["base"], rp + "/base", n);
  }

  void unknown_keys(const json& j, const std::string& ptr, const std::set<std::string>& allowed) {
    for (const auto& [key, _] : j.items())
      if (!allowed.count(key)) issue(ptr + "/" + escape_pointer_token(key), "unknown key '" + key + "'");
  }

  void key(const KeySpec& spec, const json& j, const std::string& ptr, int n, const CommandSpec& cmd) {
    switch (spec.kind) {
      case Kind::number:
        if (is_number(j, ptr) && detail::number(j) < spec.minimum)
          issue(ptr, "must be at least " + std::to_string(spec.minimum));
        break;
      case Kind::integer:
        if (!j.is_number_integer())
          issue(ptr, "expected an integer");
        else if (j.get<double>() < spec.minimum)
          issue(ptr, "must be at least " + std::to_string(static_cast<long long>(spec.minimum)));
        break;
      case Kind::string:
        if (!j.is_string()) {
          issue(ptr, "expected a string");
        } else if (!spec.choices.empty() &&
                   std::find(spec.choices.begin(), spec.choices.end(), j.get<std::string>()) == spec.choices.end()) {
          std::string list;
          for (const auto& c : spec.choices) list += (list.empty() ? "" : ", ") + c;
          issue(ptr, "expected one of: " + list);
        }
        break;
      case Kind::boolean:
        if (!j.is_boolean()) issue(ptr, "expected a boolean");
        break;
      case Kind::vector:
        is_vector(j, ptr, spec.name == "p" || spec.name == "y0" ? n : -1);
        break;
      case Kind::matrix:
        if (is_points(j, ptr) && j.size() != j[0].size()) issue(ptr, "expected a square matrix");
        break;
      case Kind::points:
        is_points(j, ptr);
        break;
      case Kind::fields:
        is_fields(j, ptr, n);
        break;
      case Kind::number_list:
        is_vector(j, ptr);
        break;
      case Kind::integer_list:
        if (!j.is_array() || j.empty()) {
          issue(ptr, "expected a nonempty array of integers");
        } else {
          for (std::size_t k = 0; k < j.size(); ++k)
            if (!j[k].is_number_integer() || j[k].get<long long>() < 1)
              issue(ptr + "/" + std::to_string(k), "expected a positive integer");
        }
        break;
      case Kind::metric:
        metric(j, ptr);
        break;
      case Kind::curve:
        curve(j, ptr, n);
        break;
      case Kind::loop:
        loop(j, ptr, n);
        break;
      case Kind::tolerances:
        if (!j.is_object()) {
          issue(ptr, "expected an object of tolerances");
          break;
        }
        for (const auto& [name, value] : j.items()) {
          const std::string tp = ptr + "/" + escape_pointer_token(name);
          if (!cmd.tolerances.count(name))
            issue(tp, "unknown tolerance '" + name + "' for command " + cmd.name);
          else if (!value.is_number() || value.get<double>() <= 0.0)
            issue(tp, "expected a positive number");
        }
        break;
    }
  }

  void task(const json& t, const std::string& ptr, bool top_level, bool inherited_metric) {
    if (!t.is_object()) {
      issue(ptr, "expected a task object");
      return;
    }
    if (!t.contains("command") || !t["command"].is_string()) {
      issue(ptr, "missing required string key 'command'");
      return;
    }
    const std::string name = t["command"].get<std::string>();
    const CommandSpec* cmd = nullptr;
    for (const auto& c : detail::commands())
      if (c.name == name) cmd = &c;
    if (!cmd) {
      std::string list;
      for (const auto& c : detail::commands()) list += (list.empty() ? "" : ", ") + c.name;
      issue(ptr + "/command", "unknown command '" + name + "' (known: " + list + ")");
      return;
    }
    std::set<std::string> allowed{"command", "metric", "label", "tolerances"};
    if (top_level) allowed.insert("seed");
    for (const auto& k : cmd->keys) allowed.insert(k.name);
    unknown_keys(t, ptr, allowed);
    if (t.contains("label") && !t["label"].is_string()) issue(ptr + "/label", "expected a string");

    int n = 0;
    if (t.contains("metric")) {
      if (!cmd->needs_metric && !inherited_metric)
        issue(ptr + "/metric", "command " + name + " does not use a metric");
      else
        n = metric(t["metric"], ptr + "/metric");
    } else if (cmd->needs_metric) {
      issue(ptr, "command " + name + " requires 'metric'");
    }
    for (const auto& r : cmd->required)
      if (!t.contains(r)) issue(ptr, "missing required key '" + r + "'");
    if (cmd->needs_metric && n == 0) return;  // dimension-dependent keys cannot be checked

    const KeySpec tol{"tolerances", Kind::tolerances, ""};
    for (const auto& [k, v] : t.items()) {
      const std::string kp = ptr + "/" + escape_pointer_token(k);
      if (k == "tolerances") {
        key(tol, v, kp, n, *cmd);
        continue;
      }
      for (const auto& spec : cmd->keys)
        if (spec.name == k) key(spec, v, kp, n, *cmd);
    }
    if (!issues_.empty()) return;

    // cross-key checks
    if (t.contains("p")) {
      const auto F = detail::metric(t["metric"]);
      const auto p = detail::vector(t["p"]);
      if (!F.manifold().chart.contains(p)) issue(ptr + "/p", "point lies outside the chart of " + F.name());
    }
    if ((name == "parallelogram" || name == "curvature") && t.contains("fields") && t["fields"].size() != 2)
      issue(ptr + "/fields", "expected exactly two fields X, Y");
    if (name == "chain" && t.contains("fields") && t["fields"].size() < 2)
      issue(ptr + "/fields", "expected at least two fields");
    if (name == "closure" && t.contains("points") && t.contains("fields") &&
        t["points"][0].size() != t["fields"][0].size())
      issue(ptr + "/points", "point dimension differs from the field dimension");
    if (name == "grouplab") {
      int size = 0;
      for (const char* m : {"X", "Y", "M"}) {
        if (!t.contains(m)) continue;
        const int s = static_cast<int>(t[m].size());
        if (size && s != size) issue(ptr + "/" + m, "matrix sizes differ");
        size = s;
      }
    }
  }

 private:
  LineIndex index_;
  std::vector<ConfigIssue> issues_;
};

}  // namespace

void validate_config(const json& config, const std::string& text) {
  Validator v(text);
  if (!config.is_object()) {
    v.issue("", "expected a JSON object");
    throw ConfigError(v.issues());
  }
  if (config.contains("seed") && !config["seed"].is_number_unsigned())
    v.issue("/seed", "expected a non-negative integer");
  const bool has_tasks = config.contains("tasks"), has_command = config.contains("command");
  if (has_tasks == has_command) {
    v.issue("", "expected exactly one of 'command' (single task) or 'tasks' (task list)");
  } else if (has_command) {
    v.task(config, "", true, false);
  } else {
    for (const auto& [key, _] : config.items())
      if (key != "tasks" && key != "metric" && key != "seed" && key != "label")
        v.issue("/" + escape_pointer_token(key), "unknown key '" + key + "'");
    if (config.contains("label") && !config["label"].is_string()) v.issue("/label", "expected a string");
    const bool top_metric = config.contains("metric");
    if (top_metric) v.metric(config["metric"], "/metric");
    if (!config["tasks"].is_array()) {
      v.issue("/tasks", "expected an array of task objects");
    } else {
      for (std::size_t k = 0; k < config["tasks"].size(); ++k) {
        json t = config["tasks"][k];
        const bool inherit = top_metric && t.is_object() && !t.contains("metric");
        if (inherit) t["metric"] = config["metric"];
        // an inherited metric is ignored by commands that do not use one
        if (inherit && t.contains("command") && t["command"].is_string()) {
          try {
            if (!detail::command(t["command"].get<std::string>()).needs_metric) t.erase("metric");
          } catch (const std::exception&) {
          }
        }
        v.task(t, "/tasks/" + std::to_string(k), false, inherit);
      }
    }
  }
  if (!v.issues().empty()) throw ConfigError(v.issues());
}

json parse_config(const std::string& text) {
  json config;
  try {
    config = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::string what = e.what();
    int line = 0;
    if (auto pos = what.find("line "); pos != std::string::npos) line = std::atoi(what.c_str() + pos + 5);
    throw ConfigError({{"", line, "malformed JSON: " + what}});
  }
  validate_config(config, text);
  return config;
}

json load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config(os.str());
}

json config_schema() {
  auto kind_schema = [](const KeySpec& k) -> json {
    const json num = {{"oneOf", {{{"type", "number"}}, {{"type", "string"}, {"description", "constant expression"}}}}};
    switch (k.kind) {
      case Kind::number: {
        json s = num;
        if (k.minimum > -1e299) s["description"] = "at least " + std::to_string(k.minimum);
        return s;
      }
      case Kind::integer: {
        json s = {{"type", "integer"}};
        if (k.minimum > -1e299) s["minimum"] = k.minimum;
        return s;
      }
      case Kind::string: {
        json s = {{"type", "string"}};
        if (!k.choices.empty()) s["enum"] = k.choices;
        return s;
      }
      case Kind::boolean: return {{"type", "boolean"}};
      case Kind::vector:
      case Kind::number_list: return {{"type", "array"}, {"items", num}, {"minItems", 1}};
      case Kind::matrix:
      case Kind::points:
        return {{"type", "array"}, {"items", {{"type", "array"}, {"items", num}}}, {"minItems", 1}};
      case Kind::fields:
        return {{"type", "array"}, {"items", {{"type", "array"}, {"items", {{"type", "string"}}}}}, {"minItems", 1}};
      case Kind::integer_list:
        return {{"type", "array"}, {"items", {{"type", "integer"}, {"minimum", 1}}}, {"minItems", 1}};
      case Kind::metric: return {{"$ref", "#/$defs/metric"}};
      case Kind::curve: return {{"$ref", "#/$defs/curve"}};
      case Kind::loop: return {{"$ref", "#/$defs/loop"}};
      case Kind::tolerances: return {{"type", "object"}};
    }
    return json::object();
  };
  const json num = {{"oneOf", {{{"type", "number"}}, {{"type", "string"}}}}};
  const json vec = {{"type", "array"}, {"items", num}};
  json defs;
  defs["metric"] = {{"oneOf",
                     {{{"type", "string"}, {"enum", catalog::names()}},
                      {{"type", "object"},
                       {"required", {"expression", "dim", "chart"}},
                       {"additionalProperties", false},
                       {"properties",
                        {{"expression", {{"type", "string"}, {"description", "F in x1..xn, y1..yn"}}},
                         {"dim", {{"type", "integer"}, {"minimum", 2}, {"maximum", 4}}},
                         {"chart",
                          {{"type", "object"},
                           {"required", {"lo", "hi"}},
                           {"additionalProperties", false},
                           {"properties", {{"lo", vec}, {"hi", vec}}}}},
                         {"riemannian", {{"type", "boolean"}}},
                         {"name", {{"type", "string"}}}}}}}}};
  defs["curve"] = {
      {"oneOf",
       {{{"type", "object"}, {"required", {"polyline"}}, {"additionalProperties", false},
         {"properties", {{"polyline", {{"type", "array"}, {"items", vec}}}}}},
        {{"type", "object"}, {"required", {"expressions"}}, {"additionalProperties", false},
         {"properties",
          {{"expressions",
            {{"type", "array"}, {"items", {{"type", "array"}, {"items", {{"type", "string"}}}}}}}}}}}}};
  defs["loop"] = {
      {"oneOf",
       {{{"type", "object"}, {"required", {"polygon"}}, {"additionalProperties", false},
         {"properties", {{"polygon", {{"type", "array"}, {"items", vec}}}}}},
        {{"type", "object"}, {"required", {"rectangle"}}, {"additionalProperties", false},
         {"properties",
          {{"rectangle",
            {{"type", "object"},
             {"required", {"a", "b"}},
             {"additionalProperties", false},
             {"properties",
              {{"a", vec}, {"b", vec}, {"i", {{"type", "integer"}}}, {"j", {{"type", "integer"}}},
               {"base", vec}}}}}}}}}}};

  json task_variants = json::array();
  for (const auto& c : detail::commands()) {
    json props;
    props["command"] = {{"const", c.name}};
    props["metric"] = {{"$ref", "#/$defs/metric"}};
    props["label"] = {{"type", "string"}};
    json tol = {{"type", "object"}, {"additionalProperties", false}, {"properties", json::object()}};
    for (const auto& [name, value] : c.tolerances)
      tol["properties"][name] = {{"type", "number"}, {"exclusiveMinimum", 0}, {"default", value}};
    props["tolerances"] = tol;
    for (const auto& k : c.keys) {
      props[k.name] = kind_schema(k);
      props[k.name]["description"] = k.doc;
    }
    json required = json::array({"command"});
    for (const auto& r : c.required) required.push_back(r);
    task_variants.push_back(
        {{"description", c.doc}, {"type", "object"}, {"required", required}, {"properties", props}});
  }
  defs["task"] = {{"oneOf", task_variants}};

  return {{"$schema", "https://json-schema.org/draft/2020-12/schema"},
          {"title", "finslab experiment config"},
          {"$defs", defs},
          {"oneOf",
           {{{"$ref", "#/$defs/task"}, {"description", "single task; may also carry 'seed'"}},
            {{"type", "object"},
             {"required", {"tasks"}},
             {"additionalProperties", false},
             {"properties",
              {{"tasks", {{"type", "array"}, {"items", {{"$ref", "#/$defs/task"}}}}},
               {"metric", {{"$ref", "#/$defs/metric"}}},
               {"seed", {{"type", "integer"}, {"minimum", 0}}},
               {"label", {{"type", "string"}}}}}}}}};
}

}  // namespace finslab::cli
