#include <iostream>

#include "CLI11.hpp"
#include "finslab/cli.hpp"

namespace cli = finslab::cli;

int main(int argc, char** argv) {
  CLI::App app{"finslab: batch runner for holonomy, curvature and Lie-closure experiments"};
  std::string config_path, out_dir, profile = "default", schema;
  std::vector<std::string> formats{"json"};
  std::optional<std::uint64_t> seed;
  bool check_only = false;
  app.add_option("--config", config_path, "experiment config (JSON)");
  app.add_option("--out", out_dir, std::string("output directory (default: $") + cli::kOutDirVariable + " or .)");
  app.add_option("--format", formats, "comma-separated output formats: json, csv")->delimiter(',');
  app.add_option("--seed", seed, "seed overriding the config seed");
  app.add_option("--tolerance-profile", profile, "default or strict")->check(CLI::IsMember({"default", "strict"}));
  app.add_option("--schema", schema, "print the config or report JSON schema and exit")
      ->check(CLI::IsMember({"config", "report"}));
  app.add_flag("--check", check_only, "validate the config and exit");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kExitPass : cli::kExitConfigError;
  }

  if (!schema.empty()) {
    std::cout << (schema == "config" ? cli::config_schema() : cli::report_schema()).dump(2) << "\n";
    return cli::kExitPass;
  }
  if (config_path.empty()) {
    std::cerr << "error: --config is required\n";
    return cli::kExitConfigError;
  }

  cli::EmitOptions emit;
  emit.json = emit.csv = false;
  for (const auto& f : formats) {
    if (f == "json")
      emit.json = true;
    else if (f == "csv")
      emit.csv = true;
    else {
      std::cerr << "error: unknown format '" << f << "' (expected json, csv)\n";
      return cli::kExitConfigError;
    }
  }

  try {
    const auto config = cli::load_config(config_path);
    if (check_only) {
      std::cout << "config ok\n";
      return cli::kExitPass;
    }
    cli::RunOptions opt;
    opt.seed = seed;
    opt.profile = cli::parse_profile(profile);
    const auto report = cli::run(config, opt);
    emit.dir = out_dir.empty() ? cli::default_output_dir() : std::filesystem::path(out_dir);
    for (const auto& path : cli::emit(report, emit)) std::cout << path.string() << "\n";
    const auto summary = report.to_json()["summary"];
    std::cout << (report.pass() ? "PASS" : "FAIL") << ": " << summary["tasks"] << " task(s), "
              << summary["failed_checks"] << " failed check(s), " << summary["errors"] << " error(s)\n";
    for (const auto& t : report.tasks)
      if (!t.error.empty()) std::cerr << "task " << t.index << " (" << t.command << "): " << t.error << "\n";
    return report.exit_status();
  } catch (const cli::ConfigError& e) {
    std::cerr << "config error:\n" << e.what() << "\n";
    return cli::kExitConfigError;
  } catch (const cli::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return cli::kExitIoError;
  }
}
