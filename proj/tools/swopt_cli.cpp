#include "swopt/scenarios.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Porous shallow-water shape optimization"};
  std::string scenario, config, out;
  int threads = 0;
  app.add_option("scenario", scenario,
                 "forward | adjoint | optimize | wellbalance-check | smoothing-study | gradient-check")
      ->required();
  app.add_option("--config", config, "INI configuration file (omitted: built-in defaults)");
  app.add_option("--out", out, "output directory, overrides run.output_dir");
  app.add_option("--threads", threads, "worker threads for independent runs")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  swopt::RunConfig cfg;
  try {
    cfg = config.empty() ? swopt::parse_config_string("") : swopt::parse_config(config);
    cfg.scenario = swopt::parse_scenario(scenario);
    if (!out.empty()) cfg.output_dir = out;
    if (threads > 0) cfg.threads = threads;
    cfg.validate();
  } catch (const swopt::Error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  return swopt::run_scenario(cfg, std::cout);
}
