#include "dynnet/error.hpp"
#include "dynnet/tools/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace dynnet;
using namespace dynnet::tools;

int main(int argc, char** argv) {
  CLI::App app{"Neural-network solvers for Hamiltonian flows, with error correction and Koopman analysis"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string checkpoint;
  std::string snapshots;
  std::string out_dir;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "experiment config (key = value)")->check(CLI::ExistingFile);
  app.add_option("--checkpoint", checkpoint, "checkpoint.json from solve");
  app.add_option("--snapshots", snapshots, "snapshot CSV from solve");
  app.add_option("--out", out_dir, "output directory (overrides output_dir)");
  auto* seed_opt = app.add_option("--seed", seed, "overrides net.seed and train.seed");

  auto* solve = app.add_subcommand("solve", "train the network, write trajectory and summary");
  auto* analysis = app.add_subcommand("error-analysis", "error bound, delta-z estimate, corrected dataset");
  auto* koopman = app.add_subcommand("koopman", "fit a Koopman model to snapshots");
  auto* bench = app.add_subcommand("benchmark", "residual vs phased vs Koopman-assisted training");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    ExperimentConfig config = config_path.empty() ? parse_config("") : load_config(config_path);
    if (!out_dir.empty()) config.output_dir = out_dir;
    if (*seed_opt) override_seed(config, seed);
    CommandInputs inputs;
    if (!checkpoint.empty()) inputs.checkpoint = checkpoint;
    if (!snapshots.empty()) inputs.snapshots = snapshots;

    if (solve->parsed()) return cmd_solve(config, inputs);
    if (analysis->parsed()) return cmd_error_analysis(config, inputs);
    if (koopman->parsed()) return cmd_koopman(config, inputs);
    if (bench->parsed()) return cmd_benchmark(config, inputs);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
