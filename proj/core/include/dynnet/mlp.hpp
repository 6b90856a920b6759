#pragma once

#include "dynnet/systems.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace dynnet {

/// Weights and biases of the 1 -> H -> H -> D sine network.
///
/// Layer k maps layer_sizes[k] inputs to layer_sizes[k+1] outputs; the two
/// hidden layers apply sin(), the output layer is affine. The flattened
/// ordering used by flatten()/assign() is, per layer, the weight matrix in
/// column-major order followed by the bias vector.
struct MlpParams {
  std::vector<int> layer_sizes;
  std::vector<Mat> weights;
  std::vector<Vec> biases;
  std::uint64_t seed = 0;

  int hidden() const { return layer_sizes.at(1); }
  int output_dim() const { return layer_sizes.back(); }

  /// Total number of scalar parameters M.
  Eigen::Index size() const;
  Vec flatten() const;
  void assign(const Eigen::Ref<const Vec>& flat);
  MlpParams zeros_like() const;
  bool all_finite() const;

  bool operator==(const MlpParams& other) const;
};

MlpParams init_params(std::span<const int> layer_sizes, std::uint64_t seed);

/// Multiplier (1 - e^{-t}) enforcing z_hat(0) = z0. Exactly 0 at t = 0.
inline double trunk_factor(double t) { return -std::expm1(-t); }

struct NetOutput {
  double t = 0.0;
  Vec raw;        // N(t)
  Vec z_hat;      // z0 + (1 - e^{-t}) N(t)
  Vec z_hat_dot;  // e^{-t} N(t) + (1 - e^{-t}) N'(t)
};

/// Single-point evaluation in dual-number arithmetic.
NetOutput forward(const MlpParams& params, double t, const Vec& z0);

/// Column-per-time evaluation over a batch; rows index output dimensions.
struct BatchOutput {
  Mat raw;
  Mat z_hat;
  Mat z_hat_dot;
};

BatchOutput forward_batch(const MlpParams& params, std::span<const double> times, const Vec& z0);

/// Value-only prediction z_hat(t) for each time, without the derivative channel.
Mat predict(const MlpParams& params, std::span<const double> times, const Vec& z0);

struct LossGrad {
  MlpParams gradient;
  double loss = 0.0;
  Vec components;  // per output dimension; sums to loss
};

/// Mean over the batch of |dz_hat/dt - F(z_hat)|^2 and its gradient with
/// respect to every weight and bias.
LossGrad backprop_loss_grad(const MlpParams& params, std::span<const double> batch,
                            const Vec& z0, const SystemDef& system);

/// Loss value only, same definition as backprop_loss_grad.
double residual_loss(const MlpParams& params, std::span<const double> batch, const Vec& z0,
                     const SystemDef& system);

/// Mean over the batch of |z_hat(t_n) - target_n|^2 and its gradient.
/// `targets` holds one column per time. Evaluates neither F nor dz_hat/dt.
LossGrad backprop_fit_grad(const MlpParams& params, std::span<const double> times,
                           const Mat& targets, const Vec& z0);

}  // namespace dynnet
