#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gconv/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Monotone X-elliptic and X-parabolic operators: solves, sweeps and G-convergence checks"};
  app.set_version_flag("--version", std::string(gconv::version()));
  app.require_subcommand(1);

  std::string config_path;
  int workers = 0;
  std::string seed;
  std::string out_dir;

  for (const auto& kind : gconv::experiment_kinds()) {
    auto* sub = app.add_subcommand(kind, "run a " + kind + " experiment");
    sub->add_option("--config,-c", config_path, "experiment config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--workers,-j", workers, "concurrent sweep members (default: GCONV_WORKERS or config)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "override the config seed (unsigned 64-bit)");
    sub->add_option("--out,-o", out_dir, "override the output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : gconv::kExitError;
  }

  const std::string kind = app.get_subcommands().front()->get_name();
  gconv::RunConfig cfg;
  try {
    cfg = gconv::parse_config(config_path);
    if (cfg.kind != kind) {
      throw gconv::ConfigError("experiment.kind: config declares '" + cfg.kind + "' but the subcommand is '" +
                               kind + "'");
    }
    if (!seed.empty()) {
      std::size_t pos = 0;
      const unsigned long long s = std::stoull(seed, &pos);
      if (pos != seed.size()) throw gconv::ConfigError("--seed: expected an unsigned 64-bit integer");
      cfg.seed = s;
    }
    if (workers > 0) {
      cfg.workers = workers;
    } else if (const char* env = std::getenv("GCONV_WORKERS")) {
      const int w = std::atoi(env);
      if (w < 1) throw gconv::ConfigError("GCONV_WORKERS: expected a positive integer");
      cfg.workers = w;
    }
    if (!out_dir.empty()) cfg.out_dir = out_dir;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return gconv::kExitError;
  }

  const auto result = gconv::execute(cfg, std::cerr);
  if (result.exit_code != gconv::kExitError) {
    std::cout << cfg.kind << ": " << (result.exit_code == gconv::kExitOk ? "passed" : "verdicts failed")
              << " (" << cfg.out_dir.string() << ")\n";
  }
  return result.exit_code;
}
