#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace finslab::cli {

inline constexpr const char* kReportSchema = "finslab-report/1";
inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kOutDirVariable = "FINSLAB_OUT_DIR";

enum ExitStatus : int { kExitPass = 0, kExitNumericFailure = 1, kExitConfigError = 2, kExitIoError = 3 };

struct ConfigIssue {
  std::string pointer;  // JSON pointer of the offending field ("" for the document)
  int line = 0;         // 1-based source line, 0 when unknown
  std::string message;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues);
  const std::vector<ConfigIssue>& issues() const { return issues_; }

 private:
  std::vector<ConfigIssue> issues_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// default: declared tolerances gate the exit status.
/// strict: advisory checks (transport flags, Richardson convergence, closure
/// stabilization) gate it as well.
enum class ToleranceProfile { standard, strict };
ToleranceProfile parse_profile(const std::string& name);
std::string profile_name(ToleranceProfile p);

/// Parses and validates; every issue found is reported, with source lines.
nlohmann::json parse_config(const std::string& text);
/// Reads a file (IoError if unreadable) and parses it.
nlohmann::json load_config(const std::filesystem::path& path);
/// Throws ConfigError. `text`, when given, is used to attach line numbers.
void validate_config(const nlohmann::json& config, const std::string& text = {});
/// JSON Schema (draft 2020-12) of the accepted configuration.
nlohmann::json config_schema();

struct Check {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  std::string relation;  // "<", "<=", ">", ">=", "=="
  bool pass = false;
  bool advisory = false;
};

/// Plot-ready table, written as RFC 4180 CSV.
struct Table {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::string to_csv() const;
};

struct TaskResult {
  std::size_t index = 0;
  std::string command;
  std::string label;
  std::string metric;
  nlohmann::json results = nlohmann::json::object();
  std::vector<Check> checks;
  std::vector<Table> tables;
  std::string error;  // computation failure; counts as a numeric failure

  bool pass(ToleranceProfile profile) const;
};

struct Report {
  nlohmann::json config;
  std::uint64_t seed = 0;
  ToleranceProfile profile = ToleranceProfile::standard;
  std::vector<TaskResult> tasks;
  std::string started, finished;  // ISO 8601 UTC; only in the sidecar

  bool pass() const;
  int exit_status() const { return pass() ? kExitPass : kExitNumericFailure; }
  /// Deterministic given config, seed and profile.
  nlohmann::json to_json() const;
  nlohmann::json timestamps() const;
};

struct RunOptions {
  std::optional<std::uint64_t> seed;  // overrides the config seed
  ToleranceProfile profile = ToleranceProfile::standard;
  bool parallel = true;
};

/// Executes every task of a validated config. Tasks run concurrently; the
/// report lists them in config order.
Report run(const nlohmann::json& config, const RunOptions& opt = {});

nlohmann::json report_schema();
/// Structural problems of an emitted report (empty when valid).
std::vector<std::string> validate_report(const nlohmann::json& report);

struct EmitOptions {
  std::filesystem::path dir;
  bool json = true;
  bool csv = false;
};

/// Writes report.json, report.timestamps.json and, with csv, one file per
/// table named "<task index>-<command>-<table>.csv". Throws IoError.
std::vector<std::filesystem::path> emit(const Report& report, const EmitOptions& opt);

/// FINSLAB_OUT_DIR if set, else the working directory.
std::filesystem::path default_output_dir();

}  // namespace finslab::cli
