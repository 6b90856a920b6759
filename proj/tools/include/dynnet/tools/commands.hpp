#pragma once

#include "dynnet/tools/config.hpp"
#include "dynnet/tools/io.hpp"

#include <filesystem>
#include <optional>

namespace dynnet::tools {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

struct CommandInputs {
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> snapshots;
};

/// Each command writes into config.output_dir (created if needed), starting
/// with resolved_config.ini, and returns an exit code. Configuration problems
/// throw ConfigError. Wall-clock values appear only under keys or columns
/// whose names start with "wall_".

/// trajectory.csv, history.csv, summary.json, checkpoint.json, loss_snapshots.csv
/// and, when train.snapshot_every > 0, snapshots.csv.
int cmd_solve(const ExperimentConfig& config, const CommandInputs& inputs = {});

/// delta_z.csv, residuals.csv, ec_dataset.csv, bound.json. Needs a checkpoint.
int cmd_error_analysis(const ExperimentConfig& config, const CommandInputs& inputs);

/// spectrum.json, extrapolation.csv, koopman_train_report.json. Needs a snapshot file.
int cmd_koopman(const ExperimentConfig& config, const CommandInputs& inputs);

/// benchmark.json with legs a (residual), b (phased) and c (Koopman steps).
int cmd_benchmark(const ExperimentConfig& config, const CommandInputs& inputs = {});

/// Uniform grid over [0, T] with ceil(T / step) intervals.
std::vector<double> uniform_grid(double horizon, double step);

}  // namespace dynnet::tools
