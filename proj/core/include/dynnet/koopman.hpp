#pragma once

#include "dynnet/mlp.hpp"
#include "dynnet/systems.hpp"
#include "dynnet/training.hpp"

#include <complex>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace dynnet {

using Complex = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

enum class Observable { Weights, LossComponents, Loss, Custom };
const char* observable_name(Observable o);
Observable parse_observable(const std::string& name);

/// Observable values along the training flow, one column per recorded
/// iteration (iterations first_iter, first_iter + stride, ...).
struct SnapshotMatrix {
  Observable observable = Observable::Custom;
  Mat columns;
  int iter_stride = 1;
  int first_iter = 0;
  std::string source_run;

  Eigen::Index steps() const { return columns.cols(); }
};

/// Flattened weight snapshots. Their iterations must be uniformly strided.
SnapshotMatrix record_weights(std::span<const WeightSnapshot> snapshots, std::string source_run = {});

/// Loss observables from a training history, taking every `stride`-th record.
/// `observable` is LossComponents (one row per output dimension) or Loss (one row).
SnapshotMatrix record_losses(std::span<const TrainRecord> history, Observable observable,
                             int stride, std::string source_run = {});

/// Arbitrary equal-length columns; ragged input is rejected.
SnapshotMatrix record_columns(std::span<const Vec> columns, Observable observable, int stride,
                              std::string source_run = {});

struct FitOptions {
  int rank = 0;     // 0 selects the numerical rank
  int window = 0;   // use the last `window` columns; 0 uses all
  double rank_tolerance = 1e-10;  // relative singular-value cutoff
};

/// Finite-rank approximation of the Koopman operator restricted to the
/// identity observable:
///   x_t ~= offset + sum_i amplitude_i * mu_i^t * mode_i,
/// with t counted in snapshot steps from the first column of the window.
struct KoopmanModel {
  int rank = 0;
  CVec eigenvalues;  // discrete-time mu_i
  CMat modes;        // one column per eigenvalue
  CVec amplitudes;
  Vec mean_offset;
  double residual = 0.0;  // max relative one-step error over the window
  int steps_fitted = 0;   // index of the last window column
  int iter_stride = 1;
  int first_iter = 0;
  bool affine_mode = false;  // true when the constant is kept as a unit mode
  std::vector<std::string> warnings;

  // Reduced one-step map on centred coordinates, for residual checks.
  Mat basis;
  Mat reduced_map;
  Vec reduced_shift;
  Vec centre;

  /// Continuous exponents lambda_i = log(mu_i) (principal branch).
  CVec exponents() const;
  /// One linear step x -> centre + U (A U^T (x - centre) + c).
  Vec step(const Vec& x) const;
};

KoopmanModel fit(const SnapshotMatrix& snapshots, const FitOptions& options = {});

/// Observable predicted `steps` snapshot steps after the first window column.
Vec propagate(const KoopmanModel& model, long steps);

struct LimitReport {
  bool converges = false;
  bool ambiguous = false;
  Vec limit;
  std::vector<Complex> unit;
  std::vector<Complex> decaying;
  std::vector<Complex> divergent;  // |mu| >= 1 and not within eps of 1
  std::string note;
};

LimitReport limit_point(const KoopmanModel& model, double eps = 1e-6);

struct KoopmanGuard {
  double gamma = 0.05;
};

struct KoopmanStepReport {
  bool accepted = false;
  int p = 0;
  long iterations_replaced = 0;  // p * stride when accepted
  double loss_before = 0.0;
  double loss_after = 0.0;
  double koopman_ms = 0.0;  // propagation plus the proposal loss evaluation
  std::string reason;
};

/// Proposes w <- propagate(model, steps_fitted + p) and keeps it only if
/// loss(proposal) <= (1 + gamma) * loss(w). On rejection `weights` is untouched.
KoopmanStepReport koopman_step(Vec& weights, const KoopmanModel& model, int p,
                               const std::function<double(const Vec&)>& loss,
                               const KoopmanGuard& guard = {});

/// Koopman training of the sine network, judged by the residual loss on a
/// fixed validation batch.
KoopmanStepReport koopman_train(MlpParams& params, const KoopmanModel& model, int p,
                                std::span<const double> validation_batch, const Vec& z0,
                                const SystemDef& system, const KoopmanGuard& guard = {});

struct LinearityReport {
  int horizon = 0;
  double max_discrepancy = 0.0;           // |sum-model - sum of component models|
  double max_relative_discrepancy = 0.0;  // relative to the summed observable
  double summed_residuals = 0.0;          // sum-model residual plus component residuals
  bool consistent = false;                // relative discrepancy <= 5 x summed residuals
};

/// Compares a model fitted to the summed observable with the sum of models
/// fitted to each row of `components`.
LinearityReport linearity_check(const SnapshotMatrix& components, const FitOptions& options = {});

}  // namespace dynnet
