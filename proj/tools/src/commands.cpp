#include "dynnet/tools/commands.hpp"

#include "dynnet/error.hpp"

#include <chrono>
#include <cmath>
#include <deque>

namespace dynnet::tools {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Json number_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

fs::path prepare(const ExperimentConfig& config) {
  fs::create_directories(config.output_dir);
  write_text(config.output_dir / "resolved_config.ini", resolved_text(config));
  return config.output_dir;
}

Checkpoint require_checkpoint(const ExperimentConfig& config, const CommandInputs& inputs,
                              const char* command) {
  if (!inputs.checkpoint) throw ConfigError(std::string(command) + " requires --checkpoint");
  Checkpoint c = load_checkpoint(*inputs.checkpoint);
  if (c.system != config.system)
    throw ConfigError("checkpoint was trained on '" + c.system + "' but the config names '" +
                      config.system + "'");
  if (c.params.layer_sizes != config.layer_sizes())
    throw ConfigError("checkpoint layer sizes do not match net.H and the system dimension");
  return c;
}

MlpParams initial_params(const ExperimentConfig& config, const CommandInputs& inputs) {
  if (inputs.checkpoint) return require_checkpoint(config, inputs, "solve").params;
  const std::vector<int> sizes = config.layer_sizes();
  return init_params(sizes, config.net_seed);
}

// Componentwise max |z_hat - z_ref| over the reference grid.
double max_error(const MlpParams& params, const ReferenceTrajectory& ref, const Vec& z0) {
  const Mat pred = predict(params, ref.times, z0);
  double worst = 0.0;
  for (std::size_t n = 0; n < ref.times.size(); ++n)
    worst = std::max(worst, (pred.col(static_cast<Eigen::Index>(n)) - ref.states[n]).cwiseAbs().maxCoeff());
  return worst;
}

std::vector<std::string> numbered(const std::string& prefix, int count, const std::string& suffix = {}) {
  std::vector<std::string> out;
  for (int i = 1; i <= count; ++i) out.push_back(prefix + std::to_string(i) + suffix);
  return out;
}

void write_history(const fs::path& path, const std::vector<TrainRecord>& history, int dim) {
  std::vector<std::string> header{"iter", "phase", "L"};
  for (const auto& h : numbered("L_", dim)) header.push_back(h);
  header.push_back("wall_ms");
  CsvWriter csv(path, header);
  for (const TrainRecord& r : history) {
    std::vector<std::string> row{std::to_string(r.iter), phase_name(r.phase), format_number(r.loss)};
    for (Eigen::Index i = 0; i < r.loss_components.size(); ++i)
      row.push_back(format_number(r.loss_components(i)));
    row.push_back(format_number(r.wall_time * 1e3));
    csv.row(row);
  }
}

std::string run_label(const ExperimentConfig& config) {
  return config.system + ":seed=" + std::to_string(config.net_seed);
}

Json cycles_json(const std::vector<CycleInfo>& cycles) {
  Json out = Json::array();
  for (const CycleInfo& c : cycles)
    out.push_back({{"cycle", c.cycle},
                   {"start_iter", c.start_iter},
                   {"residual_loss", c.residual_loss},
                   {"bound", number_or_null(c.bound)},
                   {"max_delta_z", c.max_delta_z},
                   {"phase_b_iters", c.phase_b_iters},
                   {"phase_b_final_loss", c.phase_b_final_loss}});
  return out;
}

}  // namespace

std::vector<double> uniform_grid(double horizon, double step) {
  const auto intervals = static_cast<long>(std::ceil(horizon / step - 1e-9));
  std::vector<double> grid(static_cast<std::size_t>(intervals) + 1);
  for (long n = 0; n <= intervals; ++n)
    grid[static_cast<std::size_t>(n)] = horizon * static_cast<double>(n) / static_cast<double>(intervals);
  grid.back() = horizon;
  return grid;
}

int cmd_solve(const ExperimentConfig& config, const CommandInputs& inputs) {
  const fs::path out = prepare(config);
  const SystemDef system = catalog_get(config.system);
  const InstrumentedSystem counted = instrument(system);
  MlpParams params = initial_params(config, inputs);
  const int dim = system.dim;

  const std::vector<double> grid = uniform_grid(config.horizon, config.analysis.trajectory_step);
  const ReferenceTrajectory ref = rk4_solve(system, config.z0, grid, config.analysis.h_max);

  TrainHooks hooks;
  hooks.monitor_every = config.monitor_every;
  if (config.target_error > 0.0)
    hooks.monitor = [&](const MlpParams& p, int) {
      return max_error(p, ref, config.z0) <= config.target_error;
    };

  const auto t0 = Clock::now();
  TrainResult result;
  std::vector<CycleInfo> cycles;
  if (config.phased) {
    PhasedResult phased = phased_train(params, config.schedule, config.train, config.z0, counted.system, hooks);
    result = std::move(phased.train);
    cycles = std::move(phased.cycles);
  } else {
    result = train_until(params, config.train, config.z0, counted.system, hooks);
  }
  const double wall = seconds_since(t0);

  write_history(out / "history.csv", result.history, dim);

  Json summary;
  summary["system"] = config.system;
  summary["iterations"] = result.iterations;
  summary["phased"] = config.phased;
  summary["final_loss"] = result.history.empty() ? Json(nullptr) : Json(result.history.back().loss);
  summary["converged"] = result.converged;
  summary["stopped_by_monitor"] = result.stopped_by_monitor;
  summary["f_evaluations"] = counted.counters->f.load();
  summary["jacobian_evaluations"] = counted.counters->jacobian.load();
  summary["hessian_evaluations"] = counted.counters->hessian.load();
  if (config.phased) summary["cycles"] = cycles_json(cycles);
  if (result.abort_reason) {
    summary["status"] = "aborted";
    summary["abort_reason"] = *result.abort_reason;
    summary["wall_seconds"] = wall;
    write_json(out / "summary.json", summary);
    return kExitNumerical;
  }

  const Mat z_hat = predict(result.params, ref.times, config.z0);
  std::vector<std::string> header{"t"};
  for (const auto& h : numbered("zhat_", dim)) header.push_back(h);
  for (const auto& h : numbered("zref_", dim)) header.push_back(h);
  header.push_back("abs_err");
  double worst = 0.0;
  {
    CsvWriter csv(out / "trajectory.csv", header);
    for (std::size_t n = 0; n < ref.times.size(); ++n) {
      const auto col = static_cast<Eigen::Index>(n);
      std::vector<double> row{ref.times[n]};
      for (int i = 0; i < dim; ++i) row.push_back(z_hat(i, col));
      for (int i = 0; i < dim; ++i) row.push_back(ref.states[n](i));
      const double err = (z_hat.col(col) - ref.states[n]).cwiseAbs().maxCoeff();
      worst = std::max(worst, err);
      row.push_back(err);
      csv.row(row);
    }
  }

  const ResidualProfile profile =
      residual_profile(result.params, config.z0, system, config.analysis.grid_step, config.horizon);
  const BoundReport bound = error_bound(profile, system);
  summary["status"] = "ok";
  summary["l_max"] = bound.l_max;
  summary["sigma_min"] = bound.sigma_min;
  summary["error_bound"] = number_or_null(bound.bound);
  summary["bound_vacuous"] = bound.vacuous;
  summary["max_true_error"] = worst;
  summary["bound_holds"] = !bound.vacuous && worst <= bound.bound;
  summary["wall_seconds"] = wall;
  write_json(out / "summary.json", summary);

  save_checkpoint(out / "checkpoint.json",
                  {config.system, config.z0, config.horizon, result.params, result.iterations});
  if (result.history.size() > 2 * static_cast<std::size_t>(config.koopman.stride))
    save_snapshots(out / "loss_snapshots.csv",
                   record_losses(result.history, Observable::LossComponents, config.koopman.stride,
                                 run_label(config)));
  if (result.snapshots.size() >= 3)
    save_snapshots(out / "snapshots.csv", record_weights(result.snapshots, run_label(config)));
  return kExitOk;
}

int cmd_error_analysis(const ExperimentConfig& config, const CommandInputs& inputs) {
  const fs::path out = prepare(config);
  const Checkpoint checkpoint = require_checkpoint(config, inputs, "error-analysis");
  const SystemDef system = catalog_get(config.system);
  const int dim = system.dim;

  const ResidualProfile profile = residual_profile(checkpoint.params, config.z0, system,
                                                   config.analysis.grid_step, config.horizon);
  const BoundReport bound = error_bound(profile, system);
  {
    std::vector<std::string> header{"t"};
    for (const auto& h : numbered("l_", dim)) header.push_back(h);
    header.push_back("l_norm");
    CsvWriter csv(out / "residuals.csv", header);
    for (std::size_t n = 0; n < profile.times.size(); ++n) {
      const auto r = profile.residuals.row(static_cast<Eigen::Index>(n));
      std::vector<double> row{profile.times[n]};
      for (int i = 0; i < dim; ++i) row.push_back(r(i));
      row.push_back(r.norm());
      csv.row(row);
    }
  }

  Json report;
  report["system"] = config.system;
  report["checkpoint_iterations"] = checkpoint.iterations;
  report["grid_step"] = profile.step;
  report["l_max"] = bound.l_max;
  report["sigma_min"] = bound.sigma_min;
  report["bound"] = number_or_null(bound.bound);
  report["vacuous"] = bound.vacuous;
  if (!bound.note.empty()) report["note"] = bound.note;

  std::vector<std::optional<ErrorEstimate>> estimates(3);
  bool diverged = false;
  Json per_order = Json::object();
  for (int order = 1; order <= 2; ++order) {
    const std::string name = "order" + std::to_string(order);
    if (order == 2 && !system.has_hessian()) {
      per_order[name] = {{"status", "unavailable"}};
      continue;
    }
    try {
      estimates[static_cast<std::size_t>(order)] = estimate_delta_z(profile, system, {order});
      const Mat& dz = estimates[static_cast<std::size_t>(order)]->delta_z;
      per_order[name] = {{"status", "ok"}, {"max_abs_dz", dz.cwiseAbs().maxCoeff()}};
    } catch (const EstimatorDivergence& e) {
      diverged = true;
      per_order[name] = {{"status", "diverged"}, {"abort_time", e.time()}, {"message", e.what()}};
    }
  }
  report["estimators"] = per_order;
  if (estimates[1] && estimates[2])
    report["max_order_gap"] = (estimates[1]->delta_z - estimates[2]->delta_z).cwiseAbs().maxCoeff();

  if (!diverged) {
    std::vector<std::string> header{"t"};
    for (int order = 1; order <= 2; ++order)
      if (estimates[static_cast<std::size_t>(order)])
        for (const auto& h : numbered("dz_", dim, "_order" + std::to_string(order))) header.push_back(h);
    CsvWriter csv(out / "delta_z.csv", header);
    for (std::size_t n = 0; n < profile.times.size(); ++n) {
      std::vector<double> row{profile.times[n]};
      for (int order = 1; order <= 2; ++order)
        if (const auto& est = estimates[static_cast<std::size_t>(order)])
          for (int i = 0; i < dim; ++i) row.push_back(est->delta_z(static_cast<Eigen::Index>(n), i));
      csv.row(row);
    }

    const int order = estimates[2] ? config.schedule.taylor_order : 1;
    const EcDataset ec = build_ec_dataset(checkpoint.params, *estimates[static_cast<std::size_t>(order)],
                                          config.z0, config.schedule.k, config.train.batch_size,
                                          checkpoint.iterations);
    std::vector<std::string> ec_header{"t"};
    for (const auto& h : numbered("zec_", dim)) ec_header.push_back(h);
    for (const auto& h : numbered("zhat_", dim)) ec_header.push_back(h);
    for (const auto& h : numbered("dz_", dim)) ec_header.push_back(h);
    CsvWriter csv_ec(out / "ec_dataset.csv", ec_header);
    for (std::size_t n = 0; n < ec.times.size(); ++n) {
      const auto r = static_cast<Eigen::Index>(n);
      std::vector<double> row{ec.times[n]};
      for (int i = 0; i < dim; ++i) row.push_back(ec.z_ec(r, i));
      for (int i = 0; i < dim; ++i) row.push_back(ec.z_hat(r, i));
      for (int i = 0; i < dim; ++i) row.push_back(ec.delta_z(r, i));
      csv_ec.row(row);
    }
    report["ec_dataset"] = {{"k", ec.k}, {"n_base", ec.n_base}, {"taylor_order", order},
                            {"points", ec.times.size()}};
  }
  write_json(out / "bound.json", report);
  return diverged ? kExitNumerical : kExitOk;
}

namespace {

double observable_scalar(Observable observable, const Vec& column) {
  if (observable == Observable::Loss || observable == Observable::LossComponents) return column.sum();
  return column.norm();
}

Json spectrum_json(const SnapshotMatrix& snapshots, const KoopmanModel& model, const LimitReport& limit) {
  Json eig = Json::array();
  for (Eigen::Index i = 0; i < model.eigenvalues.size(); ++i) {
    const Complex mu = model.eigenvalues(i);
    eig.push_back({{"re", mu.real()}, {"im", mu.imag()}, {"magnitude", std::abs(mu)}});
  }
  Json j;
  j["observable"] = observable_name(snapshots.observable);
  j["iter_stride"] = snapshots.iter_stride;
  j["rank"] = model.rank;
  j["eigenvalues"] = eig;
  j["residual"] = model.residual;
  j["converges"] = limit.converges;
  j["limit_norm"] = limit.converges ? Json(limit.limit.norm()) : Json(nullptr);
  if (limit.converges && limit.limit.size() <= 64)
    j["limit"] = std::vector<double>(limit.limit.begin(), limit.limit.end());
  j["ambiguous"] = limit.ambiguous;
  if (!limit.note.empty()) j["note"] = limit.note;
  j["affine_mode"] = model.affine_mode;
  j["warnings"] = model.warnings;
  return j;
}

}  // namespace

int cmd_koopman(const ExperimentConfig& config, const CommandInputs& inputs) {
  const fs::path out = prepare(config);
  if (!inputs.snapshots) throw ConfigError("koopman requires --snapshots");
  const SnapshotMatrix snapshots = load_snapshots(*inputs.snapshots);
  const Eigen::Index cols = snapshots.steps();
  const Eigen::Index required = std::max<Eigen::Index>(config.koopman.window, 6);
  if (cols < required)
    throw ConfigError("snapshot file has " + std::to_string(cols) + " columns; at least " +
                      std::to_string(required) + " are required");

  const KoopmanModel model = fit(snapshots, {config.koopman.rank, config.koopman.window});
  write_json(out / "spectrum.json", spectrum_json(snapshots, model, limit_point(model)));

  // Held-out extrapolation: fit on the first half, predict the second.
  const Eigen::Index half = cols / 2;
  SnapshotMatrix head = snapshots;
  head.columns = snapshots.columns.leftCols(half);
  const int window = config.koopman.window > 0
                         ? static_cast<int>(std::min<Eigen::Index>(config.koopman.window, half))
                         : static_cast<int>(half);
  const KoopmanModel early = fit(head, {config.koopman.rank, window});
  {
    CsvWriter csv(out / "extrapolation.csv", {"step", "iter", "actual", "predicted", "rel_err"});
    for (Eigen::Index j = half; j < cols; ++j) {
      const long ahead = early.steps_fitted + static_cast<long>(j - half + 1);
      const double actual = observable_scalar(snapshots.observable, snapshots.columns.col(j));
      const double predicted = observable_scalar(snapshots.observable, propagate(early, ahead));
      const double gap = std::abs(predicted - actual);
      const double rel = actual != 0.0 ? gap / std::abs(actual) : gap;
      csv.row({static_cast<double>(j),
               static_cast<double>(snapshots.first_iter + j * snapshots.iter_stride), actual,
               predicted, rel});
    }
  }

  Json report;
  const auto skip = [&](const std::string& reason) {
    report["requested"] = false;
    report["reason"] = reason;
    write_json(out / "koopman_train_report.json", report);
    return kExitOk;
  };
  if (config.koopman.p == 0) return skip("koopman.p is 0");
  if (snapshots.observable != Observable::Weights) return skip("snapshots are not weight snapshots");
  if (!inputs.checkpoint) return skip("no checkpoint given");

  Checkpoint checkpoint = require_checkpoint(config, inputs, "koopman");
  if (checkpoint.params.size() != snapshots.columns.rows())
    throw ConfigError("checkpoint has " + std::to_string(checkpoint.params.size()) +
                      " weights but the snapshots have " + std::to_string(snapshots.columns.rows()));
  const SystemDef system = catalog_get(config.system);
  Rng rng(config.train.seed);
  const std::vector<double> validation = sample_batch(config.train, rng);

  // Cost of one ordinary update on the same batch, for comparison.
  MlpParams probe = checkpoint.params;
  Optimizer optimizer(config.train.optimizer, probe.size());
  const auto t0 = Clock::now();
  train_step(probe, validation, config.z0, system, optimizer, 0);
  const double iteration_ms = seconds_since(t0) * 1e3;

  const KoopmanStepReport step = koopman_train(checkpoint.params, model, config.koopman.p, validation,
                                               config.z0, system, {config.koopman.gamma});
  report["requested"] = true;
  report["accepted"] = step.accepted;
  report["p"] = step.p;
  report["iterations_replaced"] = step.iterations_replaced;
  report["gamma"] = config.koopman.gamma;
  report["loss_before"] = step.loss_before;
  report["loss_after"] = number_or_null(step.loss_after);
  if (!step.reason.empty()) report["reason"] = step.reason;
  report["snapshot_last_iter"] = snapshots.first_iter + (cols - 1) * snapshots.iter_stride;
  report["checkpoint_iter"] = checkpoint.iterations;
  report["wall_koopman_ms"] = step.koopman_ms;
  report["wall_iteration_ms"] = iteration_ms;
  write_json(out / "koopman_train_report.json", report);
  save_checkpoint(out / "koopman_checkpoint.json", checkpoint);
  return kExitOk;
}

namespace {

struct LegOutcome {
  Json json;
  double wall = 0.0;
  bool reached = false;
};

void finish_leg(LegOutcome& leg, const TrainResult& result, const EvalCounters& counters,
                const ReferenceTrajectory& ref, const Vec& z0, double target) {
  const double err = max_error(result.params, ref, z0);
  leg.reached = !result.abort_reason && err <= target;
  leg.wall = result.wall_time;
  leg.json["status"] = leg.reached ? "ok" : "DNF";
  if (result.abort_reason) leg.json["abort_reason"] = *result.abort_reason;
  leg.json["iterations"] = result.iterations;
  leg.json["max_error"] = err;
  leg.json["final_loss"] = result.history.empty() ? Json(nullptr) : Json(result.history.back().loss);
  leg.json["f_evaluations"] = counters.f.load();
  leg.json["jacobian_evaluations"] = counters.jacobian.load();
  leg.json["hessian_evaluations"] = counters.hessian.load();
}

// Per-update wall time by phase, taken from consecutive history stamps. The
// first phase-B update of a cycle also carries the refresh and is skipped.
std::pair<double, double> phase_costs(const std::vector<TrainRecord>& history) {
  double a_sum = 0.0, b_sum = 0.0;
  long a_n = 0, b_n = 0;
  for (std::size_t i = 1; i < history.size(); ++i) {
    const double dt = history[i].wall_time - history[i - 1].wall_time;
    if (history[i].phase == Phase::A && history[i - 1].phase == Phase::A) {
      a_sum += dt;
      ++a_n;
    } else if (history[i].phase == Phase::B && history[i - 1].phase == Phase::B) {
      b_sum += dt;
      ++b_n;
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return {a_n ? a_sum / static_cast<double>(a_n) : nan, b_n ? b_sum / static_cast<double>(b_n) : nan};
}

TrainResult koopman_leg(const ExperimentConfig& config, MlpParams params, const SystemDef& system,
                        const TrainHooks& hooks, Json& extra) {
  TrainConfig train = config.train;
  train.snapshot_every = 0;
  RunRecorder recorder(train, hooks, params);
  Optimizer optimizer(train.optimizer, params.size());
  Rng rng(train.seed);
  Rng validation_rng(train.seed + 0x9e3779b97f4a7c15ULL);
  const std::vector<double> validation = sample_batch(train, validation_rng);
  const int window = config.koopman.window > 0 ? config.koopman.window : 20;
  const int stride = config.koopman.stride;
  const int p = config.koopman.p > 0 ? config.koopman.p : 10;

  std::vector<WeightSnapshot> recent;
  bool late = false;
  int proposals = 0, accepted = 0;
  long replaced = 0;
  double koopman_ms = 0.0;
  for (int i = 0; i < train.max_iters; ++i) {
    const std::vector<double> batch = sample_batch(train, rng);
    TrainRecord rec;
    try {
      rec = train_step(params, batch, config.z0, system, optimizer, i);
    } catch (const NumericalError& e) {
      recorder.abort(e.what());
      break;
    }
    const double loss = rec.loss;
    if (recorder.after_update(std::move(rec), params)) break;
    if (loss <= train.loss_target) {
      recorder.mark_converged();
      break;
    }
    late = late || loss <= config.koopman.enter_loss;
    if (!late || recorder.updates() % stride != 0) continue;
    recent.push_back({recorder.updates(), params.flatten()});
    if (static_cast<int>(recent.size()) < window) continue;

    const KoopmanModel model = fit(record_weights(recent), {config.koopman.rank, 0});
    const KoopmanStepReport step =
        koopman_train(params, model, p, validation, config.z0, system, {config.koopman.gamma});
    ++proposals;
    koopman_ms += step.koopman_ms;
    if (step.accepted) {
      ++accepted;
      replaced += step.iterations_replaced;
    }
    recent.clear();
  }
  extra["proposals"] = proposals;
  extra["accepted"] = accepted;
  extra["acceptance_rate"] = proposals ? Json(static_cast<double>(accepted) / proposals) : Json(nullptr);
  extra["iterations_replaced"] = replaced;
  extra["p"] = p;
  extra["window"] = window;
  extra["stride"] = stride;
  extra["wall_koopman_ms_per_proposal"] = proposals ? Json(koopman_ms / proposals) : Json(nullptr);
  return recorder.finish(std::move(params));
}

}  // namespace

int cmd_benchmark(const ExperimentConfig& config, const CommandInputs& inputs) {
  const fs::path out = prepare(config);
  const SystemDef system = catalog_get(config.system);
  const MlpParams start = initial_params(config, inputs);
  const double target = config.benchmark_target_error;
  const std::vector<double> grid = uniform_grid(config.horizon, config.analysis.trajectory_step);
  const ReferenceTrajectory ref = rk4_solve(system, config.z0, grid, config.analysis.h_max);

  const auto make_hooks = [&] {
    TrainHooks hooks;
    hooks.monitor_every = config.monitor_every;
    hooks.monitor = [&](const MlpParams& p, int) { return max_error(p, ref, config.z0) <= target; };
    return hooks;
  };

  Json legs;
  LegOutcome a, b, c;
  {
    const InstrumentedSystem counted = instrument(system);
    const TrainResult r = train_until(start, config.train, config.z0, counted.system, make_hooks());
    finish_leg(a, r, *counted.counters, ref, config.z0, target);
    a.json["wall_seconds"] = a.wall;
    legs["a"] = a.json;
  }
  {
    const InstrumentedSystem counted = instrument(system);
    TrainHooks hooks = make_hooks();
    long before_b = 0, phase_b_evals = 0, refresh_evals = 0, last_update = 0;
    Phase last_phase = Phase::A;
    hooks.phase_b_batch = [&](std::span<const int>) {
      before_b = counted.counters->total();
      if (last_phase != Phase::B) refresh_evals += before_b - last_update;
    };
    hooks.on_update = [&](const TrainRecord& rec) {
      const long now = counted.counters->total();
      if (rec.phase == Phase::B) phase_b_evals += now - before_b;
      last_update = now;
      last_phase = rec.phase;
    };
    const PhasedResult r =
        phased_train(start, config.schedule, config.train, config.z0, counted.system, hooks);
    finish_leg(b, r.train, *counted.counters, ref, config.z0, target);
    long phase_b_iters = 0;
    for (const TrainRecord& rec : r.train.history) phase_b_iters += rec.phase == Phase::B;
    const auto [cost_a, cost_b] = phase_costs(r.train.history);
    b.json["phase_b_iterations"] = phase_b_iters;
    b.json["phase_b_f_evaluations"] = phase_b_evals;
    b.json["refresh_f_evaluations"] = refresh_evals;
    b.json["cycles"] = cycles_json(r.cycles);
    b.json["wall_seconds"] = b.wall;
    b.json["wall_phase_a_ms_per_iter"] = number_or_null(cost_a * 1e3);
    b.json["wall_phase_b_ms_per_iter"] = number_or_null(cost_b * 1e3);
    b.json["wall_phase_cost_ratio"] = number_or_null(cost_b / cost_a);
    legs["b"] = b.json;
  }
  {
    const InstrumentedSystem counted = instrument(system);
    Json extra;
    const TrainResult r = koopman_leg(config, start, counted.system, make_hooks(), extra);
    finish_leg(c, r, *counted.counters, ref, config.z0, target);
    c.json.update(extra);
    c.json["wall_seconds"] = c.wall;
    legs["c"] = c.json;
  }

  Json report;
  report["system"] = config.system;
  report["target_error"] = target;
  report["max_iters"] = config.train.max_iters;
  report["legs"] = legs;
  report["a_and_b_reached"] = a.reached && b.reached;
  report["wall_ratio_b_over_a"] = a.reached && b.reached ? Json(b.wall / a.wall) : Json(nullptr);
  report["wall_ratio_c_over_a"] = a.reached && c.reached ? Json(c.wall / a.wall) : Json(nullptr);
  write_json(out / "benchmark.json", report);
  return kExitOk;
}

}  // namespace dynnet::tools
