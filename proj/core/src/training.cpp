#include "dynnet/training.hpp"

#include "dynnet/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dynnet {

void TrainConfig::validate() const {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("horizon T must be positive");
  if (batch_size < 2) throw ConfigError("batch size N must be at least 2");
  if (!(optimizer.learning_rate >= 0.0)) throw ConfigError("learning rate must be non-negative");
  if (max_iters < 0) throw ConfigError("max_iters must be non-negative");
  if (snapshot_every < 0) throw ConfigError("snapshot_every must be non-negative");
  if (optimizer.kind == OptimizerKind::Adam &&
      !(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0 && optimizer.beta2 >= 0.0 &&
        optimizer.beta2 < 1.0 && optimizer.epsilon > 0.0))
    throw ConfigError("invalid Adam hyperparameters");
}

Optimizer::Optimizer(OptimizerConfig config, Eigen::Index size)
    : config_(config), m_(Vec::Zero(size)), v_(Vec::Zero(size)) {}

void Optimizer::step(MlpParams& params, const MlpParams& gradient) {
  const Vec g = gradient.flatten();
  if (g.size() != m_.size()) throw ConfigError("optimizer state does not match parameter count");
  Vec w = params.flatten();
  ++steps_;
  switch (config_.kind) {
    case OptimizerKind::Sgd:
      w -= config_.learning_rate * g;
      break;
    case OptimizerKind::Adam: {
      m_ = config_.beta1 * m_ + (1.0 - config_.beta1) * g;
      v_ = config_.beta2 * v_ + (1.0 - config_.beta2) * g.cwiseAbs2();
      const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
      const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
      const double lr = config_.learning_rate;
      w.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + config_.epsilon);
      break;
    }
  }
  params.assign(w);
}

std::vector<double> sample_batch(const TrainConfig& config, Rng& rng) {
  const double horizon = config.horizon;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> batch;
  batch.reserve(static_cast<std::size_t>(config.batch_size) + 1);
  batch.push_back(0.0);
  for (int i = 0; i < config.batch_size - 1; ++i) {
    double t = 0.0;
    while (!(t > 0.0 && t < horizon)) t = horizon * unit(rng);
    batch.push_back(t);
  }
  batch.push_back(horizon);
  std::sort(batch.begin() + 1, batch.end() - 1);
  return batch;
}

const char* phase_name(Phase phase) {
  switch (phase) {
    case Phase::A:
      return "A";
    case Phase::B:
      return "B";
    case Phase::Burst:
      return "burst";
  }
  return "?";
}

TrainRecord train_step(MlpParams& params, std::span<const double> batch, const Vec& z0,
                       const SystemDef& system, Optimizer& optimizer, int iter) {
  LossGrad lg;
  try {
    lg = backprop_loss_grad(params, batch, z0, system);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(e.what()) + " at iteration " + std::to_string(iter));
  }
  if (!std::isfinite(lg.loss) || !lg.gradient.all_finite())
    throw NumericalError("non-finite loss at iteration " + std::to_string(iter));
  optimizer.step(params, lg.gradient);
  if (!params.all_finite())
    throw NumericalError("non-finite weights after update at iteration " + std::to_string(iter));

  TrainRecord rec;
  rec.iter = iter;
  rec.loss = lg.loss;
  rec.loss_components = lg.components;
  rec.phase = Phase::A;
  return rec;
}

RunRecorder::RunRecorder(const TrainConfig& config, const TrainHooks& hooks,
                         const MlpParams& initial)
    : config_(config), hooks_(hooks), start_(Clock::now()) {
  if (config_.snapshot_every > 0) result_.snapshots.push_back({0, initial.flatten()});
}

double RunRecorder::elapsed() const {
  return std::chrono::duration<double>(Clock::now() - start_ - excluded_).count();
}

bool RunRecorder::after_update(TrainRecord record, const MlpParams& params) {
  ++updates_;
  record.wall_time = elapsed();
  result_.history.push_back(std::move(record));
  if (hooks_.on_update) hooks_.on_update(result_.history.back());
  if (config_.snapshot_every > 0 && updates_ % config_.snapshot_every == 0)
    result_.snapshots.push_back({updates_, params.flatten()});
  if (hooks_.monitor && hooks_.monitor_every > 0 && updates_ % hooks_.monitor_every == 0) {
    const auto t0 = Clock::now();
    const bool stop = hooks_.monitor(params, updates_);
    excluded_ += Clock::now() - t0;
    if (stop) {
      result_.stopped_by_monitor = true;
      return true;
    }
  }
  return false;
}

TrainResult RunRecorder::finish(MlpParams params) {
  result_.wall_time = elapsed();
  result_.iterations = updates_;
  result_.params = std::move(params);
  return std::move(result_);
}

TrainResult train_until(MlpParams params, const TrainConfig& config, const Vec& z0,
                        const SystemDef& system, const TrainHooks& hooks) {
  config.validate();
  RunRecorder recorder(config, hooks, params);
  Optimizer optimizer(config.optimizer, params.size());
  Rng rng(config.seed);
  for (int i = 0; i < config.max_iters; ++i) {
    const std::vector<double> batch = sample_batch(config, rng);
    TrainRecord rec;
    try {
      rec = train_step(params, batch, z0, system, optimizer, i);
    } catch (const NumericalError& e) {
      recorder.abort(e.what());
      break;
    }
    const double loss = rec.loss;
    const bool stop = recorder.after_update(std::move(rec), params);
    if (loss <= config.loss_target) {
      recorder.mark_converged();
      break;
    }
    if (stop) break;
  }
  return recorder.finish(std::move(params));
}

}  // namespace dynnet
