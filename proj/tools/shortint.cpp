#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shortint/experiment.hpp"

extern char** environ;

int main(int argc, char** argv) {
  using namespace shortint;
  std::vector<std::string> names;
  for (const auto& [name, kind] : experiment_names()) names.push_back(name);

  CLI::App app{"Short-interval statistics of multiplicative functions"};
  app.set_version_flag("--version", std::string(SHORTINT_VERSION));
  std::string experiment, config;
  bool strict = false;
  std::optional<std::string> threads, cache, out;
  app.add_option("experiment", experiment, "Experiment to run")->required()->check(CLI::IsMember(names));
  app.add_option("--config", config, "Key-value config file")->required();
  app.add_flag("--strict", strict, "Treat envelope exceedances as failures");
  app.add_option("--threads", threads, "Worker threads (overrides config and environment)");
  app.add_option("--cache", cache, "Sieve segment cache directory");
  app.add_option("--out", out, "Output directory");
  app.footer("Environment: SHORTINT_<KEY> overrides config keys. Exit codes: 0 ok, 1 runtime error, "
             "2 usage error, 3 verification error.");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  ExperimentConfig cfg;
  try {
    ConfigSource src;
    src.load_file(config);
    src.load_env(environ);
    if (threads) src.set("threads", *threads, "--threads");
    if (cache) src.set("cache_dir", *cache, "--cache");
    if (out) src.set("out_dir", *out, "--out");
    cfg = resolve_config(src, experiment);
  } catch (const std::exception& e) {
    std::cerr << "shortint: " << e.what() << '\n';
    return kExitUsage;
  }

  const auto outcome = run(cfg, strict);
  const auto& counts = outcome.manifest["counts"];
  std::cout << experiment << ": " << counts["pass"].get<std::uint64_t>() << " pass, "
            << counts["recorded"].get<std::uint64_t>() << " recorded, " << counts["fail"].get<std::uint64_t>()
            << " fail; results in " << cfg.out_dir << '\n';
  if (!outcome.error.empty()) std::cerr << "shortint: " << outcome.error << '\n';
  return outcome.exit_code;
}
