#pragma once

#include "dynnet/mlp.hpp"
#include "dynnet/systems.hpp"
#include "dynnet/training.hpp"

#include <limits>
#include <span>
#include <string>
#include <vector>

namespace dynnet {

/// Residual dz_hat/dt - F(z_hat) of a network on a uniform grid over [0, T].
/// Matrices are row-per-time.
struct ResidualProfile {
  std::vector<double> times;
  Mat residuals;
  Mat z_hat;
  double l_max = 0.0;  // max row Euclidean norm of `residuals`
  double step = 0.0;
};

ResidualProfile residual_profile(const MlpParams& params, const Vec& z0, const SystemDef& system,
                                 double grid_step, double horizon);

struct BoundReport {
  double bound = 0.0;      // l_max / sigma_min, +inf when vacuous
  double sigma_min = 0.0;  // smallest singular value of F_z along z_hat
  double l_max = 0.0;
  bool vacuous = false;
  std::string note;
};

/// Componentwise error bound l_max / sigma_min with sigma_min swept over the
/// profile grid by SVD of F_z(z_hat(t_n)).
BoundReport error_bound(const ResidualProfile& profile, const SystemDef& system,
                        double sigma_floor = 1e-12);

struct ErrorEstimate {
  std::vector<double> times;
  Mat delta_z;  // row-per-time, delta_z.row(0) == 0
  int taylor_order = 1;
  double sigma_min = 0.0;
};

struct EstimatorOptions {
  int taylor_order = 2;
  // Abort when |delta_z| exceeds ceiling_factor * bound (skipped if the bound is vacuous).
  double ceiling_factor = 1e3;
};

/// Explicit recursion
///   dz_{n+1} = dz_n + dt [F_z dz_n (+ 1/2 dz_n^T F_zz dz_n) - l_n],  dz_0 = 0
/// with derivatives evaluated at z_hat(t_n). Throws NumericalError on divergence.
ErrorEstimate estimate_delta_z(const ResidualProfile& profile, const SystemDef& system,
                               const EstimatorOptions& options = {});

/// Self-generated supervised targets z_ec = z_hat + delta_z on k * n_base
/// evenly spaced grid points. Row-per-time.
struct EcDataset {
  std::vector<double> times;
  Mat z_ec;
  Mat z_hat;
  Mat delta_z;
  int k = 1;
  int n_base = 0;
  int source_iter = 0;
};

EcDataset build_ec_dataset(const MlpParams& params, const ErrorEstimate& estimate, const Vec& z0,
                           int k, int n_base, int source_iter = 0);

/// Mean over the selected rows of |z_hat(t_n) - z_ec(t_n)|^2 and its gradient.
LossGrad surrogate_loss_grad(const MlpParams& params, const EcDataset& ec,
                             std::span<const int> batch_indices, const Vec& z0);

/// First and last dataset indices plus `n - 1` distinct interior indices, sorted.
std::vector<int> sample_ec_batch(const EcDataset& ec, int n, Rng& rng);

struct PhaseSchedule {
  double tau_enter = 1e-5;    // residual loss at which correction starts
  double tau_refresh = 1e-7;  // surrogate loss at which phase B ends
  int burst_iters = 50;
  int k = 10;
  int max_cycles = 3;
  int phase_b_max_iters = 5000;
  double phase_b_learning_rate = 1e-4;  // Adam step size for the supervised fit
  double grid_step = 1e-4;  // estimator resolution
  int taylor_order = 2;

  void validate() const;
};

struct CycleInfo {
  int cycle = 0;
  int start_iter = 0;
  double residual_loss = 0.0;
  double bound = 0.0;
  double max_delta_z = 0.0;
  int phase_b_iters = 0;
  double phase_b_final_loss = 0.0;
};

struct PhasedResult {
  TrainResult train;
  std::vector<CycleInfo> cycles;
};

/// Alternates residual training (phase A) with cheap supervised training on
/// error-corrected data (phase B) followed by a short residual burst. After
/// max_cycles the run continues as plain residual training.
PhasedResult phased_train(MlpParams params, const PhaseSchedule& schedule,
                          const TrainConfig& config, const Vec& z0, const SystemDef& system,
                          const TrainHooks& hooks = {});

}  // namespace dynnet
