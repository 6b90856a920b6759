#pragma once

#include "dynnet/error_correction.hpp"
#include "dynnet/koopman.hpp"
#include "dynnet/systems.hpp"
#include "dynnet/training.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace dynnet::tools {

struct KoopmanSettings {
  Observable observable = Observable::LossComponents;
  int rank = 2;
  int window = 20;
  int stride = 10;
  int p = 10;
  double gamma = 0.05;
  double enter_loss = 1e-5;  // late-stage threshold for Koopman proposals in the benchmark
};

struct AnalysisSettings {
  double grid_step = 1e-4;        // residual profile / estimator grid
  double trajectory_step = 1e-3;  // trajectory.csv grid
  double h_max = 1e-4;            // RK4 substep
};

struct ExperimentConfig {
  std::string system = "harmonic_oscillator";
  Vec z0;  // empty selects the system default
  double horizon = 3.14159265358979323846;
  int hidden = 32;
  std::uint64_t net_seed = 1;
  TrainConfig train;
  double target_error = 0.0;  // >0 stops training once max |z_hat - z_rk4| reaches it
  int monitor_every = 100;
  bool phased = false;
  PhaseSchedule schedule;
  KoopmanSettings koopman;
  AnalysisSettings analysis;
  double benchmark_target_error = 1e-3;
  std::filesystem::path output_dir = "out";

  std::vector<int> layer_sizes() const;
  /// Checks names and dimensions; fills z0 from the system default when empty.
  void resolve();
};

/// Parses `key = value` lines. Keys may be dotted (`train.lr`) or grouped
/// under `[section]` headers; `#` starts a comment. Unknown or repeated keys
/// are errors. The result is resolved.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every key with its effective value, in a form parse_config accepts.
std::string resolved_text(const ExperimentConfig& config);

/// Applies --seed: both the initialisation and the batch sampling seeds.
void override_seed(ExperimentConfig& config, std::uint64_t seed);

}  // namespace dynnet::tools
