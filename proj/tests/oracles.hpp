#pragma once

// Reference computations written independently of the library's batched code.

#include "dynnet/mlp.hpp"
#include "dynnet/systems.hpp"

#include <complex>
#include <functional>
#include <span>
#include <vector>

namespace oracle {

using dynnet::MlpParams;
using dynnet::SystemDef;
using dynnet::Vec;
using C = std::complex<double>;

inline std::vector<C> raw_output(const MlpParams& p, C t) {
  const auto h = static_cast<std::size_t>(p.hidden());
  const auto d = static_cast<std::size_t>(p.output_dim());
  std::vector<C> h1(h), h2(h), out(d);
  for (std::size_t i = 0; i < h; ++i)
    h1[i] = std::sin(p.weights[0](long(i), 0) * t + p.biases[0](long(i)));
  for (std::size_t i = 0; i < h; ++i) {
    C acc = p.biases[1](long(i));
    for (std::size_t j = 0; j < h; ++j) acc += p.weights[1](long(i), long(j)) * h1[j];
    h2[i] = std::sin(acc);
  }
  for (std::size_t k = 0; k < d; ++k) {
    C acc = p.biases[2](long(k));
    for (std::size_t j = 0; j < h; ++j) acc += p.weights[2](long(k), long(j)) * h2[j];
    out[k] = acc;
  }
  return out;
}

struct State {
  Vec z;
  Vec z_dot;
};

// z_hat(t) and its time derivative by complex step.
inline State state(const MlpParams& p, double t, const Vec& z0) {
  constexpr double h = 1e-30;
  const C s(t, h);
  const std::vector<C> raw = raw_output(p, s);
  const C gate = 1.0 - std::exp(-s);
  State out{Vec(z0.size()), Vec(z0.size())};
  for (long k = 0; k < z0.size(); ++k) {
    const C z = z0(k) + gate * raw[std::size_t(k)];
    out.z(k) = z.real();
    out.z_dot(k) = z.imag() / h;
  }
  return out;
}

inline double residual_loss(const MlpParams& p, std::span<const double> batch, const Vec& z0,
                            const SystemDef& system) {
  double total = 0.0;
  for (double t : batch) {
    const State s = state(p, t, z0);
    total += (s.z_dot - system.f(s.z)).squaredNorm();
  }
  return total / static_cast<double>(batch.size());
}

// Central difference of `loss` with respect to flattened weight `index`.
inline double central_difference(const MlpParams& p, long index,
                                 const std::function<double(const MlpParams&)>& loss,
                                 double step = 1e-5) {
  const Vec w = p.flatten();
  MlpParams q = p;
  Vec plus = w, minus = w;
  plus(index) += step;
  minus(index) -= step;
  q.assign(plus);
  const double up = loss(q);
  q.assign(minus);
  const double down = loss(q);
  return (up - down) / (2.0 * step);
}

// Relative gap with a floor so gradients near zero are judged absolutely.
inline double relative_gap(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace oracle
