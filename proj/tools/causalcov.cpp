#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "causalcov/cli.hpp"
#include "causalcov/parallel.hpp"

using namespace causalcov;

int main(int argc, char** argv) {
  CLI::App app{"causalcov: bounds and Monte-Carlo checks for causal Gaussian processes"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicates;
  std::optional<std::string> out_dir;

  for (const char* name : {"bounds", "verify", "identify", "sweep", "simulate"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
    sub->add_option("--replicates", replicates, "override the replicate count")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kExitOk : cli::kExitConfigError;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    cli::ExperimentConfig config = cli::load_config(config_path);
    if (seed) config.seed = *seed;
    if (replicates) config.replicates = *replicates;
    if (out_dir) config.output_dir = *out_dir;

    cli::CommandOptions options;
    options.out_dir = config.output_dir;
    options.base_dir = std::filesystem::path(config_path).parent_path();
    options.config_path = config_path;
    options.workers = default_worker_count();

    if (command == "bounds") return cli::cmd_bounds(config, options);
    if (command == "verify") return cli::cmd_verify(config, options);
    if (command == "identify") return cli::cmd_identify(config, options);
    if (command == "sweep") return cli::cmd_sweep(config, options);
    return cli::cmd_simulate(config, options);
  } catch (const Error& e) {
    std::cerr << command << ": " << e.what() << "\n";
    return cli::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << command << ": " << e.what() << "\n";
    return cli::kExitConfigError;
  }
}
