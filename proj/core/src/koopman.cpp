#include "dynnet/koopman.hpp"

#include "dynnet/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace dynnet {

namespace {

// Eigenvalues closer than this to 1 keep the constant as an explicit mode
// instead of folding it into a fixed-point offset.
constexpr double kFoldTolerance = 1e-8;

Complex ipow(Complex base, long exponent) {
  Complex result(1.0, 0.0);
  while (exponent > 0) {
    if (exponent & 1) result *= base;
    base *= base;
    exponent >>= 1;
  }
  return result;
}

void require_records(Eigen::Index count) {
  if (count < 3)
    throw ConfigError("at least 3 snapshot records are required, got " + std::to_string(count));
}

KoopmanModel constant_model(const Mat& window, const Vec& centre) {
  KoopmanModel model;
  model.rank = 1;
  model.eigenvalues = CVec::Ones(1);
  const double norm = centre.norm();
  Vec direction = Vec::Zero(centre.size());
  if (norm > 0.0)
    direction = centre / norm;
  else
    direction(0) = 1.0;
  model.modes = direction.cast<Complex>();
  model.amplitudes = CVec::Constant(1, Complex(norm, 0.0));
  model.mean_offset = Vec::Zero(centre.size());
  model.basis = Mat::Zero(centre.size(), 0);
  model.reduced_map = Mat::Zero(0, 0);
  model.reduced_shift = Vec::Zero(0);
  model.centre = centre;
  model.steps_fitted = static_cast<int>(window.cols()) - 1;
  model.warnings.push_back("snapshots are constant; single unit mode");
  return model;
}

}  // namespace

const char* observable_name(Observable o) {
  switch (o) {
    case Observable::Weights:
      return "weights";
    case Observable::LossComponents:
      return "loss_components";
    case Observable::Loss:
      return "loss";
    case Observable::Custom:
      return "custom";
  }
  return "custom";
}

Observable parse_observable(const std::string& name) {
  if (name == "weights") return Observable::Weights;
  if (name == "loss_components") return Observable::LossComponents;
  if (name == "loss") return Observable::Loss;
  if (name == "custom") return Observable::Custom;
  throw ConfigError("unknown observable '" + name + "' (weights, loss_components, loss, custom)");
}

SnapshotMatrix record_columns(std::span<const Vec> columns, Observable observable, int stride,
                              std::string source_run) {
  require_records(static_cast<Eigen::Index>(columns.size()));
  if (stride < 1) throw ConfigError("snapshot stride must be positive");
  const Eigen::Index rows = columns.front().size();
  SnapshotMatrix sm;
  sm.observable = observable;
  sm.iter_stride = stride;
  sm.source_run = std::move(source_run);
  sm.columns.resize(rows, static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j].size() != rows)
      throw ConfigError("ragged snapshot: column " + std::to_string(j) + " has length " +
                        std::to_string(columns[j].size()) + ", expected " + std::to_string(rows));
    sm.columns.col(static_cast<Eigen::Index>(j)) = columns[j];
  }
  return sm;
}

SnapshotMatrix record_weights(std::span<const WeightSnapshot> snapshots, std::string source_run) {
  require_records(static_cast<Eigen::Index>(snapshots.size()));
  const int stride = snapshots[1].iter - snapshots[0].iter;
  if (stride < 1) throw ConfigError("weight snapshots must have increasing iterations");
  std::vector<Vec> cols;
  cols.reserve(snapshots.size());
  for (std::size_t j = 0; j < snapshots.size(); ++j) {
    if (j > 0 && snapshots[j].iter - snapshots[j - 1].iter != stride)
      throw ConfigError("weight snapshots are not uniformly strided");
    cols.push_back(snapshots[j].weights);
  }
  SnapshotMatrix sm = record_columns(cols, Observable::Weights, stride, std::move(source_run));
  sm.first_iter = snapshots.front().iter;
  return sm;
}

SnapshotMatrix record_losses(std::span<const TrainRecord> history, Observable observable,
                             int stride, std::string source_run) {
  if (observable != Observable::Loss && observable != Observable::LossComponents)
    throw ConfigError("record_losses needs the loss or loss_components observable");
  if (stride < 1) throw ConfigError("snapshot stride must be positive");
  std::vector<Vec> cols;
  for (std::size_t j = 0; j < history.size(); j += static_cast<std::size_t>(stride)) {
    if (observable == Observable::Loss)
      cols.push_back(Vec::Constant(1, history[j].loss));
    else
      cols.push_back(history[j].loss_components);
  }
  SnapshotMatrix sm = record_columns(cols, observable, stride, std::move(source_run));
  sm.first_iter = history.front().iter;
  return sm;
}

CVec KoopmanModel::exponents() const {
  CVec out(eigenvalues.size());
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) out(i) = std::log(eigenvalues(i));
  return out;
}

Vec KoopmanModel::step(const Vec& x) const {
  if (basis.cols() == 0) return centre;
  return centre + basis * (reduced_map * (basis.transpose() * (x - centre)) + reduced_shift);
}

KoopmanModel fit(const SnapshotMatrix& snapshots, const FitOptions& options) {
  const Eigen::Index total = snapshots.columns.cols();
  const Eigen::Index n = options.window > 0 ? std::min<Eigen::Index>(options.window, total) : total;
  if (n < 3)
    throw ConfigError("fit needs at least 3 snapshot columns, got " + std::to_string(n));
  if (options.rank < 0) throw ConfigError("rank must be non-negative");
  if (options.rank > 0 && n < options.rank + 1)
    throw ConfigError("window of " + std::to_string(n) + " columns is too short for rank " +
                      std::to_string(options.rank) + " (needs " +
                      std::to_string(options.rank + 1) + ")");
  if (!snapshots.columns.allFinite()) throw NumericalError("snapshot matrix has non-finite entries");

  const Mat window = snapshots.columns.rightCols(n);
  const Eigen::Index pairs = n - 1;
  const Vec centre = window.rowwise().mean();
  const Mat x = window.leftCols(pairs).colwise() - centre;
  const Mat y = window.rightCols(pairs).colwise() - centre;

  Eigen::JacobiSVD<Mat> svd(x, Eigen::ComputeThinU);
  const Vec& sv = svd.singularValues();
  const double scale = std::max(1.0, window.cwiseAbs().maxCoeff()) * std::sqrt(double(n));
  int numerical_rank = 0;
  if (sv.size() > 0 && sv(0) > 1e-14 * scale)
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv(i) > options.rank_tolerance * sv(0)) ++numerical_rank;

  KoopmanModel model;
  if (numerical_rank == 0) {
    model = constant_model(window, centre);
  } else {
    int r = options.rank > 0 ? options.rank : numerical_rank;
    if (r > numerical_rank) {
      model.warnings.push_back("rank " + std::to_string(r) + " exceeds numerical rank " +
                               std::to_string(numerical_rank) + "; reduced");
      r = numerical_rank;
    }
    // The affine fit has r + 1 unknowns per row and `pairs` equations.
    if (r > pairs - 1) {
      model.warnings.push_back("rank " + std::to_string(r) + " needs " + std::to_string(r + 2) +
                               " columns; reduced to " + std::to_string(pairs - 1));
      r = static_cast<int>(pairs - 1);
    }

    const Mat basis = svd.matrixU().leftCols(r);
    const Mat xr = basis.transpose() * x;
    const Mat yr = basis.transpose() * y;
    Mat z(r + 1, pairs);
    z.topRows(r) = xr;
    z.row(r).setOnes();
    const Mat b = z.transpose().completeOrthogonalDecomposition().solve(yr.transpose()).transpose();
    const Mat a = b.leftCols(r);
    const Vec c = b.col(r);

    model.basis = basis;
    model.reduced_map = a;
    model.reduced_shift = c;
    model.centre = centre;

    Eigen::EigenSolver<Mat> eig(a);
    if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of reduced operator failed");
    double closest_to_one = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i)
      closest_to_one = std::min(closest_to_one, std::abs(eig.eigenvalues()(i) - 1.0));

    const Vec x0 = xr.col(0);
    if (closest_to_one > kFoldTolerance) {
      // Fixed point of the affine map becomes the offset; the remaining flow is linear.
      const Vec fixed = (Mat::Identity(r, r) - a).partialPivLu().solve(c);
      const CMat w = eig.eigenvectors();
      model.eigenvalues = eig.eigenvalues();
      model.modes = basis.cast<Complex>() * w;
      model.amplitudes = w.fullPivLu().solve((x0 - fixed).cast<Complex>());
      model.mean_offset = centre + basis * fixed;
    } else {
      Mat aug = Mat::Zero(r + 1, r + 1);
      aug.topLeftCorner(r, r) = a;
      aug.topRightCorner(r, 1) = c;
      aug(r, r) = 1.0;
      Eigen::EigenSolver<Mat> eig_aug(aug);
      if (eig_aug.info() != Eigen::Success)
        throw NumericalError("eigendecomposition of augmented operator failed");
      const CMat w = eig_aug.eigenvectors();
      CVec start(r + 1);
      start.head(r) = x0.cast<Complex>();
      start(r) = 1.0;
      model.eigenvalues = eig_aug.eigenvalues();
      model.modes = basis.cast<Complex>() * w.topRows(r);
      model.amplitudes = w.fullPivLu().solve(start);
      model.mean_offset = centre;
      model.affine_mode = true;
      model.warnings.push_back("eigenvalue near 1: no isolated fixed point, constant kept as a mode");
    }
    model.rank = static_cast<int>(model.eigenvalues.size());
    model.steps_fitted = static_cast<int>(pairs);
  }

  model.iter_stride = snapshots.iter_stride;
  model.first_iter = snapshots.first_iter + static_cast<int>(total - n) * snapshots.iter_stride;
  for (Eigen::Index j = 0; j < pairs; ++j) {
    const Vec target = window.col(j + 1);
    const double denom = std::max(target.norm(), std::numeric_limits<double>::min());
    model.residual = std::max(model.residual, (model.step(window.col(j)) - target).norm() / denom);
  }
  return model;
}

Vec propagate(const KoopmanModel& model, long steps) {
  if (steps < 0) throw ConfigError("propagation steps must be non-negative");
  CVec coeff(model.eigenvalues.size());
  for (Eigen::Index i = 0; i < coeff.size(); ++i)
    coeff(i) = model.amplitudes(i) * ipow(model.eigenvalues(i), steps);
  const CVec value = model.modes * coeff;
  const Vec re = model.mean_offset + value.real();
  const double residue = value.imag().norm();
  if (!(residue <= 1e-8 * std::max(1.0, re.norm())))
    throw NumericalError("complex residue " + std::to_string(residue) +
                         " in propagated observable");
  return re;
}

LimitReport limit_point(const KoopmanModel& model, double eps) {
  LimitReport report;
  report.limit = model.mean_offset;
  for (Eigen::Index i = 0; i < model.eigenvalues.size(); ++i) {
    const Complex mu = model.eigenvalues(i);
    const double mag = std::abs(mu);
    if (std::abs(mu - 1.0) <= eps) {
      report.unit.push_back(mu);
      report.limit += (model.amplitudes(i) * model.modes.col(i)).real();
      continue;
    }
    if (mag >= 1.0 - eps && mag < 1.0 + eps) report.ambiguous = true;
    if (mag < 1.0)
      report.decaying.push_back(mu);
    else
      report.divergent.push_back(mu);
  }
  report.converges = report.divergent.empty();
  if (!report.converges)
    report.note = "non-decaying eigenvalues off 1: flow is divergent or oscillatory";
  else if (report.ambiguous)
    report.note = "eigenvalues crowd the unit circle; limit is uncertain";
  return report;
}

KoopmanStepReport koopman_step(Vec& weights, const KoopmanModel& model, int p,
                               const std::function<double(const Vec&)>& loss,
                               const KoopmanGuard& guard) {
  if (p < 0) throw ConfigError("Koopman step count must be non-negative");
  if (model.mean_offset.size() != weights.size())
    throw ConfigError("model dimension " + std::to_string(model.mean_offset.size()) +
                      " does not match parameter count " + std::to_string(weights.size()));
  KoopmanStepReport report;
  report.p = p;
  report.loss_before = loss(weights);
  if (p == 0) {
    report.accepted = true;
    report.loss_after = report.loss_before;
    report.reason = "no-op";
    return report;
  }

  const auto t0 = std::chrono::steady_clock::now();
  Vec proposal;
  try {
    proposal = propagate(model, static_cast<long>(model.steps_fitted) + p);
  } catch (const NumericalError& e) {
    report.reason = e.what();
    report.loss_after = std::numeric_limits<double>::quiet_NaN();
    return report;
  }
  const auto stop_clock = [&] {
    report.koopman_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  };

  if (!proposal.allFinite()) {
    stop_clock();
    report.reason = "proposal is not finite";
    report.loss_after = std::numeric_limits<double>::quiet_NaN();
    return report;
  }
  report.loss_after = loss(proposal);
  stop_clock();
  if (std::isfinite(report.loss_after) &&
      report.loss_after <= (1.0 + guard.gamma) * report.loss_before) {
    weights = std::move(proposal);
    report.accepted = true;
    report.iterations_replaced = static_cast<long>(p) * model.iter_stride;
    report.reason = "accepted";
  } else {
    report.reason = "loss increase beyond guard";
  }
  return report;
}

KoopmanStepReport koopman_train(MlpParams& params, const KoopmanModel& model, int p,
                                std::span<const double> validation_batch, const Vec& z0,
                                const SystemDef& system, const KoopmanGuard& guard) {
  Vec w = params.flatten();
  MlpParams scratch = params;
  auto loss = [&](const Vec& v) {
    scratch.assign(v);
    try {
      return residual_loss(scratch, validation_batch, z0, system);
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  KoopmanStepReport report = koopman_step(w, model, p, loss, guard);
  if (report.accepted && p > 0) params.assign(w);
  return report;
}

LinearityReport linearity_check(const SnapshotMatrix& components, const FitOptions& options) {
  LinearityReport report;
  SnapshotMatrix sum = components;
  sum.observable = Observable::Loss;
  sum.columns = components.columns.colwise().sum();
  const KoopmanModel sum_model = fit(sum, options);
  std::vector<KoopmanModel> parts;
  for (Eigen::Index d = 0; d < components.columns.rows(); ++d) {
    SnapshotMatrix row = components;
    row.columns = components.columns.row(d);
    parts.push_back(fit(row, options));
  }

  report.horizon = sum_model.steps_fitted + 1;
  report.summed_residuals = sum_model.residual;
  for (const auto& m : parts) report.summed_residuals += m.residual;
  for (int t = 0; t < report.horizon; ++t) {
    const double whole = propagate(sum_model, t)(0);
    double pieces = 0.0;
    for (const auto& m : parts) pieces += propagate(m, t)(0);
    const double gap = std::abs(whole - pieces);
    report.max_discrepancy = std::max(report.max_discrepancy, gap);
    report.max_relative_discrepancy =
        std::max(report.max_relative_discrepancy,
                 gap / std::max(std::abs(whole), std::numeric_limits<double>::min()));
  }
  report.consistent = report.max_relative_discrepancy <= 5.0 * report.summed_residuals + 1e-10;
  return report;
}

}  // namespace dynnet
