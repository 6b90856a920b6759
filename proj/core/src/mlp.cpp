#include "dynnet/mlp.hpp"

#include "dynnet/dual.hpp"
#include "dynnet/error.hpp"
#include "dynnet/sincos.hpp"

#include <cmath>
#include <random>
#include <string>

namespace dynnet {

namespace {

constexpr int kLayers = 3;

void check_shape(const MlpParams& params, const Vec& z0) {
  if (params.weights.size() != kLayers || params.biases.size() != kLayers)
    throw ConfigError("network must have exactly three affine layers");
  if (z0.size() != params.output_dim())
    throw ConfigError("initial condition has length " + std::to_string(z0.size()) +
                      " but the network has " + std::to_string(params.output_dim()) + " outputs");
}

Eigen::RowVectorXd as_row(std::span<const double> times) {
  return Eigen::Map<const Eigen::RowVectorXd>(times.data(), static_cast<Eigen::Index>(times.size()));
}

// Hidden activations of the value and tangent channels for a batch.
struct Activations {
  Eigen::RowVectorXd t;
  Mat a1, h1, c1, h1d;  // layer 1 pre-activation, sin, cos, tangent of sin
  Mat a2, h2, c2, a2d, h2d;
  Mat raw, raw_dot;
};

// Elementwise sin and cos of `a` in one pass.
void sin_cos(const Mat& a, Mat& s, Mat& c) {
  s.resize(a.rows(), a.cols());
  c.resize(a.rows(), a.cols());
  sincos_array(a.data(), s.data(), c.data(), static_cast<std::size_t>(a.size()));
}

Activations activate(const MlpParams& p, std::span<const double> times, bool with_tangent) {
  Activations act;
  act.t = as_row(times);
  const auto& w0 = p.weights[0];
  act.a1 = (w0 * act.t).colwise() + p.biases[0];
  sin_cos(act.a1, act.h1, act.c1);
  act.a2.noalias() = p.weights[1] * act.h1;
  act.a2.colwise() += p.biases[1];
  sin_cos(act.a2, act.h2, act.c2);
  act.raw = (p.weights[2] * act.h2).colwise() + p.biases[2];
  if (with_tangent) {
    // d a1 / dt = W0 for every column.
    act.h1d = act.c1.array().colwise() * w0.col(0).array();
    act.a2d = p.weights[1] * act.h1d;
    act.h2d = (act.c2.array() * act.a2d.array()).matrix();
    act.raw_dot = p.weights[2] * act.h2d;
  }
  return act;
}

// Reverse pass for the value channel only, given dL/d raw.
void backward_value(const MlpParams& p, const Activations& act, const Mat& d_raw, MlpParams& g) {
  g.weights[2].noalias() += d_raw * act.h2.transpose();
  g.biases[2] += d_raw.rowwise().sum();
  const Mat d_a2 = (act.c2.array() * (p.weights[2].transpose() * d_raw).array()).matrix();
  g.weights[1].noalias() += d_a2 * act.h1.transpose();
  g.biases[1] += d_a2.rowwise().sum();
  const Mat d_a1 = (act.c1.array() * (p.weights[1].transpose() * d_a2).array()).matrix();
  g.weights[0].noalias() += d_a1 * act.t.transpose();
  g.biases[0] += d_a1.rowwise().sum();
}

// Reverse pass through both channels, given dL/d raw and dL/d raw_dot.
void backward_dual(const MlpParams& p, const Activations& act, const Mat& d_raw,
                   const Mat& d_raw_dot, MlpParams& g) {
  const auto& w0 = p.weights[0];
  g.weights[2].noalias() += d_raw * act.h2.transpose() + d_raw_dot * act.h2d.transpose();
  g.biases[2] += d_raw.rowwise().sum();

  const Mat d_h2 = p.weights[2].transpose() * d_raw;
  const Mat d_h2d = p.weights[2].transpose() * d_raw_dot;
  // h2 = sin(a2), h2d = cos(a2) * a2d
  const Mat d_a2 =
      (act.c2.array() * d_h2.array() - act.h2.array() * act.a2d.array() * d_h2d.array()).matrix();
  const Mat d_a2d = (act.c2.array() * d_h2d.array()).matrix();

  g.weights[1].noalias() += d_a2 * act.h1.transpose() + d_a2d * act.h1d.transpose();
  g.biases[1] += d_a2.rowwise().sum();

  const Mat d_h1 = p.weights[1].transpose() * d_a2;
  const Mat d_h1d = p.weights[1].transpose() * d_a2d;
  // h1 = sin(a1), h1d = cos(a1) * w0
  const Mat d_a1 = (act.c1.array() * d_h1.array() -
                    (act.h1.array().colwise() * w0.col(0).array()) * d_h1d.array())
                       .matrix();
  const Mat d_a1d = (act.c1.array() * d_h1d.array()).matrix();

  g.weights[0].noalias() += d_a1 * act.t.transpose();
  g.weights[0].col(0) += d_a1d.rowwise().sum();
  g.biases[0] += d_a1.rowwise().sum();
}

}  // namespace

Eigen::Index MlpParams::size() const {
  Eigen::Index n = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) n += weights[k].size() + biases[k].size();
  return n;
}

Vec MlpParams::flatten() const {
  Vec flat(size());
  Eigen::Index at = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    flat.segment(at, weights[k].size()) = weights[k].reshaped();
    at += weights[k].size();
    flat.segment(at, biases[k].size()) = biases[k];
    at += biases[k].size();
  }
  return flat;
}

void MlpParams::assign(const Eigen::Ref<const Vec>& flat) {
  if (flat.size() != size())
    throw ConfigError("parameter vector has length " + std::to_string(flat.size()) +
                      ", expected " + std::to_string(size()));
  Eigen::Index at = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    weights[k].reshaped() = flat.segment(at, weights[k].size());
    at += weights[k].size();
    biases[k] = flat.segment(at, biases[k].size());
    at += biases[k].size();
  }
}

MlpParams MlpParams::zeros_like() const {
  MlpParams z = *this;
  for (auto& w : z.weights) w.setZero();
  for (auto& b : z.biases) b.setZero();
  return z;
}

bool MlpParams::all_finite() const {
  for (std::size_t k = 0; k < weights.size(); ++k)
    if (!weights[k].allFinite() || !biases[k].allFinite()) return false;
  return true;
}

bool MlpParams::operator==(const MlpParams& other) const {
  if (layer_sizes != other.layer_sizes || seed != other.seed) return false;
  for (std::size_t k = 0; k < weights.size(); ++k)
    if (weights[k] != other.weights[k] || biases[k] != other.biases[k]) return false;
  return true;
}

MlpParams init_params(std::span<const int> layer_sizes, std::uint64_t seed) {
  if (layer_sizes.size() != kLayers + 1)
    throw ConfigError("expected 4 layer sizes [1, H, H, D], got " +
                      std::to_string(layer_sizes.size()));
  for (int n : layer_sizes)
    if (n <= 0) throw ConfigError("non-positive layer size");
  if (layer_sizes[0] != 1) throw ConfigError("input layer must have size 1 (time)");

  MlpParams p;
  p.layer_sizes.assign(layer_sizes.begin(), layer_sizes.end());
  p.seed = seed;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int k = 0; k < kLayers; ++k) {
    const int fan_in = layer_sizes[k];
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Mat w(layer_sizes[k + 1], fan_in);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = scale * unit(rng);
    p.weights.push_back(std::move(w));
    p.biases.push_back(Vec::Zero(layer_sizes[k + 1]));
  }
  return p;
}

NetOutput forward(const MlpParams& params, double t, const Vec& z0) {
  check_shape(params, z0);
  const int h = params.hidden();
  const int d = params.output_dim();
  const DualScalar input = DualScalar::variable(t);

  std::vector<DualScalar> h1(h), h2(h);
  for (int i = 0; i < h; ++i)
    h1[i] = sin(DualScalar(params.weights[0](i, 0)) * input + DualScalar(params.biases[0](i)));
  for (int i = 0; i < h; ++i) {
    DualScalar acc(params.biases[1](i));
    for (int j = 0; j < h; ++j) acc += DualScalar(params.weights[1](i, j)) * h1[j];
    h2[i] = sin(acc);
  }

  const DualScalar gate = DualScalar(1.0) - exp(-input);
  NetOutput out;
  out.t = t;
  out.raw.resize(d);
  out.z_hat.resize(d);
  out.z_hat_dot.resize(d);
  const double factor = trunk_factor(t);
  for (int i = 0; i < d; ++i) {
    DualScalar n(params.biases[2](i));
    for (int j = 0; j < h; ++j) n += DualScalar(params.weights[2](i, j)) * h2[j];
    const DualScalar z = gate * n;
    out.raw(i) = n.value;
    // Value uses the expm1 form of the gate so t = 0 yields exactly z0.
    out.z_hat(i) = z0(i) + factor * n.value;
    out.z_hat_dot(i) = z.tangent;
  }
  return out;
}

BatchOutput forward_batch(const MlpParams& params, std::span<const double> times, const Vec& z0) {
  check_shape(params, z0);
  const Activations act = activate(params, times, true);
  Eigen::RowVectorXd factor(act.t.size()), decay(act.t.size());
  for (Eigen::Index n = 0; n < factor.size(); ++n) {
    factor(n) = trunk_factor(act.t(n));
    decay(n) = std::exp(-act.t(n));
  }

  BatchOutput out;
  out.raw = act.raw;
  out.z_hat = (act.raw.array().rowwise() * factor.array()).matrix().colwise() + z0;
  out.z_hat_dot = (act.raw.array().rowwise() * decay.array() +
                   act.raw_dot.array().rowwise() * factor.array())
                      .matrix();
  return out;
}

Mat predict(const MlpParams& params, std::span<const double> times, const Vec& z0) {
  check_shape(params, z0);
  const Activations act = activate(params, times, false);
  Eigen::RowVectorXd factor(act.t.size());
  for (Eigen::Index n = 0; n < factor.size(); ++n) factor(n) = trunk_factor(act.t(n));
  return (act.raw.array().rowwise() * factor.array()).matrix().colwise() + z0;
}

LossGrad backprop_loss_grad(const MlpParams& params, std::span<const double> batch,
                            const Vec& z0, const SystemDef& system) {
  check_shape(params, z0);
  if (batch.empty()) throw ConfigError("empty batch");
  if (system.dim != params.output_dim())
    throw ConfigError("system '" + system.name + "' has dimension " + std::to_string(system.dim) +
                      " but the network has " + std::to_string(params.output_dim()) + " outputs");

  const Activations act = activate(params, batch, true);
  const auto count = static_cast<Eigen::Index>(batch.size());
  const int d = params.output_dim();

  Eigen::RowVectorXd factor(count), decay(count);
  for (Eigen::Index n = 0; n < count; ++n) {
    factor(n) = trunk_factor(act.t(n));
    decay(n) = std::exp(-act.t(n));
  }
  const Mat z_hat = (act.raw.array().rowwise() * factor.array()).matrix().colwise() + z0;
  const Mat z_dot = (act.raw.array().rowwise() * decay.array() +
                     act.raw_dot.array().rowwise() * factor.array())
                        .matrix();

  Mat residual(d, count);
  Mat d_zhat(d, count);
  for (Eigen::Index n = 0; n < count; ++n) {
    const Vec zn = z_hat.col(n);
    residual.col(n) = z_dot.col(n) - system.f(zn);
    // dL/dz_hat = -F_z^T dL/dl
    d_zhat.col(n) = -system.jacobian(zn).transpose() * residual.col(n);
  }
  if (!residual.allFinite()) throw NumericalError("non-finite residual in loss evaluation");

  const double scale = 2.0 / static_cast<double>(count);
  const Mat d_res = scale * residual;
  d_zhat *= scale;

  // z_hat = z0 + g N, z_dot = e N + g N'
  const Mat d_raw = (d_zhat.array().rowwise() * factor.array() +
                     d_res.array().rowwise() * decay.array())
                        .matrix();
  const Mat d_raw_dot = (d_res.array().rowwise() * factor.array()).matrix();

  LossGrad out;
  out.gradient = params.zeros_like();
  backward_dual(params, act, d_raw, d_raw_dot, out.gradient);
  out.components = residual.array().square().rowwise().sum().matrix() / static_cast<double>(count);
  out.loss = out.components.sum();
  return out;
}

double residual_loss(const MlpParams& params, std::span<const double> batch, const Vec& z0,
                     const SystemDef& system) {
  if (batch.empty()) throw ConfigError("empty batch");
  const BatchOutput net = forward_batch(params, batch, z0);
  double total = 0.0;
  for (Eigen::Index n = 0; n < net.z_hat.cols(); ++n) {
    const Vec z = net.z_hat.col(n);
    total += (net.z_hat_dot.col(n) - system.f(z)).squaredNorm();
  }
  if (!std::isfinite(total)) throw NumericalError("non-finite residual in loss evaluation");
  return total / static_cast<double>(batch.size());
}

LossGrad backprop_fit_grad(const MlpParams& params, std::span<const double> times,
                           const Mat& targets, const Vec& z0) {
  check_shape(params, z0);
  if (times.empty()) throw ConfigError("empty batch");
  const auto count = static_cast<Eigen::Index>(times.size());
  if (targets.rows() != params.output_dim() || targets.cols() != count)
    throw ConfigError("target matrix shape does not match batch");

  const Activations act = activate(params, times, false);
  Eigen::RowVectorXd factor(count);
  for (Eigen::Index n = 0; n < count; ++n) factor(n) = trunk_factor(act.t(n));
  const Mat z_hat = (act.raw.array().rowwise() * factor.array()).matrix().colwise() + z0;
  const Mat residual = z_hat - targets;

  const double scale = 2.0 / static_cast<double>(count);
  const Mat d_raw = ((scale * residual).array().rowwise() * factor.array()).matrix();

  LossGrad out;
  out.gradient = params.zeros_like();
  backward_value(params, act, d_raw, out.gradient);
  out.components = residual.array().square().rowwise().sum().matrix() / static_cast<double>(count);
  out.loss = out.components.sum();
  return out;
}

}  // namespace dynnet
