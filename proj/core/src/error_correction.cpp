#include "dynnet/error_correction.hpp"

#include "dynnet/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dynnet {

namespace {

double min_singular_value(const Mat& m) {
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues().minCoeff();
}

}  // namespace

ResidualProfile residual_profile(const MlpParams& params, const Vec& z0, const SystemDef& system,
                                 double grid_step, double horizon) {
  if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
  if (!(grid_step > 0.0) || grid_step > horizon * (1.0 + 1e-12))
    throw ConfigError("grid step must lie in (0, T]");
  if (system.dim != params.output_dim()) throw ConfigError("system/network dimension mismatch");

  const auto intervals = static_cast<long>(std::ceil(horizon / grid_step - 1e-9));
  ResidualProfile out;
  out.step = horizon / static_cast<double>(intervals);
  out.times.resize(static_cast<std::size_t>(intervals) + 1);
  for (long n = 0; n <= intervals; ++n)
    out.times[static_cast<std::size_t>(n)] = static_cast<double>(n) * out.step;
  out.times.back() = horizon;

  const BatchOutput net = forward_batch(params, out.times, z0);
  const auto count = static_cast<Eigen::Index>(out.times.size());
  out.z_hat = net.z_hat.transpose();
  out.residuals.resize(count, system.dim);
  for (Eigen::Index n = 0; n < count; ++n) {
    const Vec z = net.z_hat.col(n);
    out.residuals.row(n) = (net.z_hat_dot.col(n) - system.f(z)).transpose();
  }
  if (!out.residuals.allFinite()) throw NumericalError("non-finite residual in profile");
  out.l_max = out.residuals.rowwise().norm().maxCoeff();
  return out;
}

BoundReport error_bound(const ResidualProfile& profile, const SystemDef& system,
                        double sigma_floor) {
  BoundReport report;
  report.l_max = profile.l_max;
  report.sigma_min = std::numeric_limits<double>::infinity();
  for (Eigen::Index n = 0; n < profile.z_hat.rows(); ++n) {
    const Vec z = profile.z_hat.row(n).transpose();
    report.sigma_min = std::min(report.sigma_min, min_singular_value(system.jacobian(z)));
  }
  if (report.sigma_min <= sigma_floor) {
    report.vacuous = true;
    report.bound = std::numeric_limits<double>::infinity();
    report.note = "bound vacuous: Jacobian near-singular on trajectory";
    return report;
  }
  report.bound = report.l_max / report.sigma_min;
  return report;
}

ErrorEstimate estimate_delta_z(const ResidualProfile& profile, const SystemDef& system,
                               const EstimatorOptions& options) {
  if (options.taylor_order != 1 && options.taylor_order != 2)
    throw ConfigError("taylor order must be 1 or 2");
  if (options.taylor_order == 2 && !system.has_hessian())
    throw ConfigError("system '" + system.name + "' provides no Hessian for order-2 correction");

  const auto count = static_cast<Eigen::Index>(profile.times.size());
  const int dim = system.dim;
  ErrorEstimate est;
  est.times = profile.times;
  est.taylor_order = options.taylor_order;
  est.delta_z = Mat::Zero(count, dim);

  // The ceiling needs the bound, which needs sigma_min over the whole grid.
  std::vector<Mat> jacobians;
  jacobians.reserve(static_cast<std::size_t>(count));
  est.sigma_min = std::numeric_limits<double>::infinity();
  for (Eigen::Index n = 0; n < count; ++n) {
    jacobians.push_back(system.jacobian(profile.z_hat.row(n).transpose()));
    est.sigma_min = std::min(est.sigma_min, min_singular_value(jacobians.back()));
  }
  const double bound = est.sigma_min > 1e-12 ? profile.l_max / est.sigma_min
                                             : std::numeric_limits<double>::infinity();
  const double ceiling = options.ceiling_factor * bound;

  Vec dz = Vec::Zero(dim);
  for (Eigen::Index n = 0; n + 1 < count; ++n) {
    const double dt = profile.times[static_cast<std::size_t>(n + 1)] -
                      profile.times[static_cast<std::size_t>(n)];
    Vec rate = jacobians[static_cast<std::size_t>(n)] * dz - profile.residuals.row(n).transpose();
    if (options.taylor_order == 2) {
      const HessianTensor h = system.hessian(profile.z_hat.row(n).transpose());
      for (int i = 0; i < dim; ++i) rate(i) += 0.5 * dz.dot(h[static_cast<std::size_t>(i)] * dz);
    }
    dz += dt * rate;
    if (!dz.allFinite() || dz.norm() > ceiling) {
      std::ostringstream msg;
      msg << "estimator diverged at t = " << profile.times[static_cast<std::size_t>(n + 1)]
          << " (|dz| = " << dz.norm() << ", ceiling " << ceiling
          << "); refine the grid step or train further";
      throw EstimatorDivergence(msg.str(), profile.times[static_cast<std::size_t>(n + 1)]);
    }
    est.delta_z.row(n + 1) = dz.transpose();
  }
  return est;
}

EcDataset build_ec_dataset(const MlpParams& params, const ErrorEstimate& estimate, const Vec& z0,
                           int k, int n_base, int source_iter) {
  if (k < 1 || n_base < 1) throw ConfigError("k and N_base must be positive");
  const auto grid = static_cast<long>(estimate.times.size());
  const long size = static_cast<long>(k) * n_base;
  if (size > grid)
    throw ConfigError("k*N_base = " + std::to_string(size) + " exceeds estimate grid of " +
                      std::to_string(grid) + " points");
  if (size < 2) throw ConfigError("error-corrected dataset needs at least two points");

  EcDataset ec;
  ec.k = k;
  ec.n_base = n_base;
  ec.source_iter = source_iter;
  ec.times.resize(static_cast<std::size_t>(size));
  ec.delta_z.resize(size, estimate.delta_z.cols());
  for (long i = 0; i < size; ++i) {
    // Evenly spaced indices including both endpoints; identity when size == grid.
    const long src = (i * (grid - 1) + (size - 1) / 2) / (size - 1);
    ec.times[static_cast<std::size_t>(i)] = estimate.times[static_cast<std::size_t>(src)];
    ec.delta_z.row(i) = estimate.delta_z.row(src);
  }
  ec.z_hat = predict(params, ec.times, z0).transpose();
  ec.z_ec = ec.z_hat + ec.delta_z;
  return ec;
}

LossGrad surrogate_loss_grad(const MlpParams& params, const EcDataset& ec,
                             std::span<const int> batch_indices, const Vec& z0) {
  if (batch_indices.empty()) throw ConfigError("empty batch");
  std::vector<double> times;
  times.reserve(batch_indices.size());
  Mat targets(ec.z_ec.cols(), static_cast<Eigen::Index>(batch_indices.size()));
  for (std::size_t j = 0; j < batch_indices.size(); ++j) {
    const int idx = batch_indices[j];
    if (idx < 0 || idx >= static_cast<int>(ec.times.size()))
      throw ConfigError("batch index " + std::to_string(idx) + " outside dataset");
    times.push_back(ec.times[static_cast<std::size_t>(idx)]);
    targets.col(static_cast<Eigen::Index>(j)) = ec.z_ec.row(idx).transpose();
  }
  return backprop_fit_grad(params, times, targets, z0);
}

std::vector<int> sample_ec_batch(const EcDataset& ec, int n, Rng& rng) {
  const int size = static_cast<int>(ec.times.size());
  const int interior = size - 2;
  if (n < 1 || n - 1 > interior)
    throw ConfigError("dataset of " + std::to_string(size) + " points cannot supply a batch of " +
                      std::to_string(n + 1) + " distinct times");
  // Floyd's algorithm: n-1 distinct values from [1, size-2].
  std::vector<char> chosen(static_cast<std::size_t>(size), 0);
  std::vector<int> batch;
  batch.reserve(static_cast<std::size_t>(n) + 1);
  batch.push_back(0);
  for (int j = interior - (n - 1) + 1; j <= interior; ++j) {
    std::uniform_int_distribution<int> pick(1, j);
    const int v = pick(rng);
    const int take = chosen[static_cast<std::size_t>(v)] ? j : v;
    chosen[static_cast<std::size_t>(take)] = 1;
    batch.push_back(take);
  }
  std::sort(batch.begin() + 1, batch.end());
  batch.push_back(size - 1);
  return batch;
}

void PhaseSchedule::validate() const {
  if (!(tau_refresh < tau_enter)) throw ConfigError("tau_refresh must be below tau_enter");
  if (burst_iters < 1) throw ConfigError("burst_iters must be at least 1");
  if (k < 1) throw ConfigError("k must be at least 1");
  if (max_cycles < 0) throw ConfigError("max_cycles must be non-negative");
  if (phase_b_max_iters < 1) throw ConfigError("phase_b_max_iters must be at least 1");
  if (!(phase_b_learning_rate >= 0.0)) throw ConfigError("phase_b_learning_rate must be non-negative");
  if (!(grid_step > 0.0)) throw ConfigError("grid_step must be positive");
  if (taylor_order != 1 && taylor_order != 2) throw ConfigError("taylor_order must be 1 or 2");
}

PhasedResult phased_train(MlpParams params, const PhaseSchedule& schedule,
                          const TrainConfig& config, const Vec& z0, const SystemDef& system,
                          const TrainHooks& hooks) {
  config.validate();
  schedule.validate();
  PhasedResult out;
  RunRecorder recorder(config, hooks, params);
  Optimizer optimizer(config.optimizer, params.size());
  Rng rng(config.seed);

  bool stop = false;
  // One residual update; returns the pre-update loss or NaN after an abort.
  auto residual_update = [&](Phase tag) {
    const std::vector<double> batch = sample_batch(config, rng);
    TrainRecord rec;
    try {
      rec = train_step(params, batch, z0, system, optimizer, recorder.updates());
    } catch (const NumericalError& e) {
      recorder.abort(e.what());
      stop = true;
      return std::numeric_limits<double>::quiet_NaN();
    }
    rec.phase = tag;
    const double loss = rec.loss;
    stop = recorder.after_update(std::move(rec), params) || stop;
    if (loss <= config.loss_target) {
      recorder.mark_converged();
      stop = true;
    }
    return loss;
  };
  auto budget_left = [&] { return recorder.updates() < config.max_iters; };

  int cycle = 0;
  while (budget_left() && !stop) {
    const double loss = residual_update(Phase::A);
    if (stop || cycle >= schedule.max_cycles || !(loss <= schedule.tau_enter)) continue;

    CycleInfo info;
    info.cycle = cycle;
    info.start_iter = recorder.updates();
    info.residual_loss = loss;
    EcDataset ec;
    try {
      const ResidualProfile profile =
          residual_profile(params, z0, system, schedule.grid_step, config.horizon);
      info.bound = error_bound(profile, system).bound;
      const ErrorEstimate est =
          estimate_delta_z(profile, system, {schedule.taylor_order, EstimatorOptions{}.ceiling_factor});
      info.max_delta_z = est.delta_z.rowwise().norm().maxCoeff();
      ec = build_ec_dataset(params, est, z0, schedule.k, config.batch_size, recorder.updates());
    } catch (const NumericalError& e) {
      recorder.abort("cycle " + std::to_string(cycle) + ": " + e.what());
      out.cycles.push_back(info);
      break;
    }

    OptimizerConfig fit_config = config.optimizer;
    fit_config.learning_rate = schedule.phase_b_learning_rate;
    Optimizer fit_optimizer(fit_config, params.size());
    for (int b = 0; b < schedule.phase_b_max_iters && budget_left() && !stop; ++b) {
      const std::vector<int> batch = sample_ec_batch(ec, config.batch_size, rng);
      if (hooks.phase_b_batch) hooks.phase_b_batch(batch);
      const LossGrad lg = surrogate_loss_grad(params, ec, batch, z0);
      if (!std::isfinite(lg.loss)) {
        recorder.abort("non-finite surrogate loss at iteration " +
                       std::to_string(recorder.updates()));
        stop = true;
        break;
      }
      fit_optimizer.step(params, lg.gradient);
      TrainRecord rec;
      rec.iter = recorder.updates();
      rec.loss = lg.loss;
      rec.loss_components = lg.components;
      rec.phase = Phase::B;
      ++info.phase_b_iters;
      info.phase_b_final_loss = lg.loss;
      stop = recorder.after_update(std::move(rec), params);
      if (lg.loss <= schedule.tau_refresh) break;
    }
    for (int b = 0; b < schedule.burst_iters && budget_left() && !stop; ++b)
      residual_update(Phase::Burst);
    out.cycles.push_back(info);
    ++cycle;
  }
  out.train = recorder.finish(std::move(params));
  return out;
}

}  // namespace dynnet
