// btdet: perturbation determinants, spectral shift functions, and
// trace-formula diagnostics for boundary-condition extension pairs.
//
//   btdet run <config.json> [--out DIR] [--jobs K] [--seed S]
//   btdet check <config.json>
//   btdet suite [--seed S]
//
// Exit codes: 0 success, 2 config violation, 3 computation error,
// 4 property-suite failure. Logs go to stderr, data to files.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "btdet/config.hpp"
#include "btdet/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"boundary-triplet perturbation determinant toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  unsigned jobs = 1;
  std::uint64_t seed = 0;

  auto* run = app.add_subcommand("run", "execute the tasks of a config file");
  run->add_option("config", config_path, "JSON run configuration")->required();
  run->add_option("--out", out_dir, "output directory (overrides config)");
  run->add_option("--jobs", jobs, "within-task parallelism");
  run->add_option("--seed", seed, "seed recorded for randomized suites");

  auto* check = app.add_subcommand("check", "validate a config file and exit");
  check->add_option("config", config_path, "JSON run configuration")->required();

  auto* suite = app.add_subcommand("suite", "run the built-in property suites");
  suite->add_option("--seed", seed, "seed for the randomized sweeps");

  CLI11_PARSE(app, argc, argv);

  if (const char* env = std::getenv("BTDET_JOBS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) jobs = static_cast<unsigned>(v);
  }

  try {
    if (check->parsed()) {
      btdet::cli::load_config(config_path);
      std::cerr << "config ok\n";
      return 0;
    }
    if (suite->parsed()) {
      btdet::cli::json report;
      report["seed"] = seed;
      const bool ok = btdet::cli::builtin_suite(seed, report);
      std::cout << report.dump(2) << "\n";
      std::cerr << (ok ? "suite pass\n" : "suite FAILED\n");
      return ok ? 0 : 4;
    }
    // run
    auto cfg = btdet::cli::load_config(config_path);
    auto res = btdet::cli::run_config(cfg, out_dir, jobs);
    for (const auto& t : res.summary["tasks"]) {
      std::cerr << t["name"].get<std::string>() << ": " << t["status"].get<std::string>();
      if (t.contains("error")) std::cerr << " (" << t["error"].get<std::string>() << ")";
      std::cerr << "\n";
    }
    return res.exit_code;
  } catch (const btdet::cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const btdet::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
