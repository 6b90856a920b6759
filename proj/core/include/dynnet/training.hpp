#pragma once

#include "dynnet/mlp.hpp"
#include "dynnet/systems.hpp"

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace dynnet {

using Rng = std::mt19937_64;

enum class OptimizerKind { Sgd, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  double horizon = 3.141592653589793;  // T
  int batch_size = 64;                 // N; a batch holds N + 1 times
  OptimizerConfig optimizer;
  int max_iters = 20000;
  double loss_target = 1e-7;
  int snapshot_every = 0;  // 0 disables weight snapshots
  std::uint64_t seed = 1;

  void validate() const;
};

/// First-order optimizer over the flattened parameter vector.
class Optimizer {
public:
  Optimizer(OptimizerConfig config, Eigen::Index size);

  void step(MlpParams& params, const MlpParams& gradient);
  const OptimizerConfig& config() const { return config_; }
  long steps() const { return steps_; }

private:
  OptimizerConfig config_;
  Vec m_;
  Vec v_;
  long steps_ = 0;
};

/// {0, T} plus N-1 uniform draws from the open interval (0, T), sorted.
std::vector<double> sample_batch(const TrainConfig& config, Rng& rng);

enum class Phase { A, B, Burst };
const char* phase_name(Phase phase);

struct TrainRecord {
  int iter = 0;
  double loss = 0.0;
  Vec loss_components;
  double wall_time = 0.0;  // seconds since the start of the run, excluding monitor time
  Phase phase = Phase::A;
};

/// Flattened weights after `iter` updates.
struct WeightSnapshot {
  int iter = 0;
  Vec weights;
};

/// Residual-loss update: computes L and its gradient at the current weights,
/// applies one optimizer step and reports L as measured before the update.
TrainRecord train_step(MlpParams& params, std::span<const double> batch, const Vec& z0,
                       const SystemDef& system, Optimizer& optimizer, int iter);

/// Optional callbacks. `monitor` runs every `monitor_every` updates with the
/// current weights and the number of updates applied; returning true stops
/// the run. Its wall time is excluded from recorded timings.
struct TrainHooks {
  std::function<bool(const MlpParams&, int)> monitor;
  int monitor_every = 100;
  // Receives each phase-B batch before its surrogate step (phased training only).
  std::function<void(std::span<const int>)> phase_b_batch;
  // Called after every recorded update, before the monitor.
  std::function<void(const TrainRecord&)> on_update;
};

struct TrainResult {
  MlpParams params;
  std::vector<TrainRecord> history;
  std::vector<WeightSnapshot> snapshots;
  int iterations = 0;
  bool converged = false;        // loss target met
  bool stopped_by_monitor = false;
  std::optional<std::string> abort_reason;  // set on non-finite loss
  double wall_time = 0.0;
};

/// Bookkeeping shared by training loops: run clock, history, weight
/// snapshots at the configured cadence and the stop monitor.
class RunRecorder {
public:
  RunRecorder(const TrainConfig& config, const TrainHooks& hooks, const MlpParams& initial);

  /// Appends `record` (whose iter is the index of the update just applied)
  /// and snapshots `params` when due. Returns true when the monitor asks to stop.
  bool after_update(TrainRecord record, const MlpParams& params);
  double elapsed() const;
  int updates() const { return updates_; }
  const std::vector<TrainRecord>& history() const { return result_.history; }

  TrainResult finish(MlpParams params);
  void abort(std::string reason) { result_.abort_reason = std::move(reason); }
  void mark_converged() { result_.converged = true; }

private:
  using Clock = std::chrono::steady_clock;

  const TrainConfig& config_;
  const TrainHooks& hooks_;
  TrainResult result_;
  Clock::time_point start_;
  Clock::duration excluded_{};
  int updates_ = 0;
};

/// Residual training until L <= loss_target or max_iters updates.
TrainResult train_until(MlpParams params, const TrainConfig& config, const Vec& z0,
                        const SystemDef& system, const TrainHooks& hooks = {});

}  // namespace dynnet
