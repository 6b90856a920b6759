#include "dynnet/dual.hpp"
#include "dynnet/error.hpp"
#include "dynnet/mlp.hpp"
#include "dynnet/sincos.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace dynnet;

namespace {

MlpParams net(int h, int d, std::uint64_t seed) {
  const std::vector<int> sizes{1, h, h, d};
  return init_params(sizes, seed);
}

// Pushes weights off their initial scale so every layer matters.
MlpParams perturbed(int h, int d, std::uint64_t seed) {
  MlpParams p = net(h, d, seed);
  std::mt19937_64 rng(seed + 17);
  std::normal_distribution<double> n(0.0, 0.3);
  Vec w = p.flatten();
  for (long i = 0; i < w.size(); ++i) w(i) += n(rng);
  p.assign(w);
  return p;
}

}  // namespace

TEST_CASE("dual numbers propagate first derivatives") {
  const DualScalar x = DualScalar::variable(0.7);
  const DualScalar y = sin(x) * exp(-x) + cos(x * x) / (x + DualScalar(2.0));
  const double v = 0.7;
  const double expect = std::cos(v) * std::exp(-v) - std::sin(v) * std::exp(-v) +
                        (-2.0 * v * std::sin(v * v) * (v + 2.0) - std::cos(v * v)) /
                            ((v + 2.0) * (v + 2.0));
  CHECK(y.tangent == doctest::Approx(expect).epsilon(1e-14));
  CHECK(y.value == doctest::Approx(std::sin(v) * std::exp(-v) + std::cos(v * v) / (v + 2.0)));
}

TEST_CASE("vectorised sincos agrees with libm") {
  std::vector<double> x;
  for (int i = -20000; i <= 20000; ++i) x.push_back(i * 0.00731);
  x.push_back(1e7);  // forces the libm fallback
  std::vector<double> s(x.size()), c(x.size());
  sincos_array(x.data(), s.data(), c.data(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    REQUIRE(std::abs(s[i] - std::sin(x[i])) <= 4e-16);
    REQUIRE(std::abs(c[i] - std::cos(x[i])) <= 4e-16);
  }
}

TEST_CASE("init_params shapes, scale and determinism") {
  const MlpParams p = net(8, 3, 42);
  CHECK(p.size() == 8 + 8 + 64 + 8 + 24 + 3);
  CHECK(p.weights[1].rows() == 8);
  CHECK(p.weights[2].rows() == 3);
  for (const Vec& b : p.biases) CHECK(b.isZero(0.0));
  CHECK(p.weights[0].cwiseAbs().maxCoeff() <= 1.0);
  CHECK(p.weights[1].cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(8.0));
  CHECK(net(8, 3, 42) == p);
  CHECK_FALSE(net(8, 3, 43) == p);

  CHECK_THROWS_AS(init_params(std::vector<int>{1, 8, 2}, 1), ConfigError);
  CHECK_THROWS_AS(init_params(std::vector<int>{1, 0, 8, 2}, 1), ConfigError);
  CHECK_THROWS_AS(init_params(std::vector<int>{2, 8, 8, 2}, 1), ConfigError);
}

TEST_CASE("flatten and assign round trip") {
  MlpParams p = perturbed(5, 2, 3);
  const Vec w = p.flatten();
  MlpParams q = p.zeros_like();
  CHECK(q.flatten().isZero(0.0));
  q.assign(w);
  CHECK(q == p);
  CHECK(w(0) == p.weights[0](0, 0));
  CHECK(w(5) == p.biases[0](0));
}

TEST_CASE("trunk transform pins the initial condition") {
  const MlpParams p = perturbed(16, 2, 5);
  const Vec z0{{0.3, -1.2}};
  const NetOutput at0 = forward(p, 0.0, z0);
  CHECK(at0.z_hat == z0);
  const std::vector<double> times{0.0, 0.25, 1.0, 3.0};
  const BatchOutput b = forward_batch(p, times, z0);
  for (std::size_t n = 0; n < times.size(); ++n) {
    const Vec expect = z0 + (1.0 - std::exp(-times[n])) * b.raw.col(long(n));
    CHECK((b.z_hat.col(long(n)) - expect).norm() <= 1e-15);
  }
}

TEST_CASE("forward, forward_batch and the complex-step oracle agree") {
  for (int d : {1, 2, 4}) {
    const MlpParams p = perturbed(12, d, 11 + d);
    const Vec z0 = Vec::LinSpaced(d, 0.5, -0.5);
    const std::vector<double> times{0.0, 1e-3, 0.4, 1.7, 6.0};
    const BatchOutput b = forward_batch(p, times, z0);
    const Mat pred = predict(p, times, z0);
    for (std::size_t n = 0; n < times.size(); ++n) {
      const NetOutput single = forward(p, times[n], z0);
      const oracle::State o = oracle::state(p, times[n], z0);
      CHECK((single.z_hat - o.z).norm() <= 1e-13);
      CHECK((single.z_hat_dot - o.z_dot).norm() <= 1e-13);
      CHECK((b.z_hat.col(long(n)) - o.z).norm() <= 1e-13);
      CHECK((b.z_hat_dot.col(long(n)) - o.z_dot).norm() <= 1e-13);
      CHECK((pred.col(long(n)) - o.z).norm() <= 1e-13);
    }
  }
}

TEST_CASE("residual loss gradient matches central differences") {
  const Vec z0{{1.0, 0.0}};
  const std::vector<double> batch{0.0, 0.3, 0.9, 1.6, 2.2, 3.14159};
  for (const char* name : {"harmonic_oscillator", "nonlinear_pendulum", "cubic_oscillator"}) {
    const SystemDef sys = catalog_get(name);
    const MlpParams p = perturbed(10, 2, 7);
    const LossGrad lg = backprop_loss_grad(p, batch, z0, sys);
    CHECK(lg.loss == doctest::Approx(oracle::residual_loss(p, batch, z0, sys)).epsilon(1e-12));
    CHECK(lg.components.sum() == doctest::Approx(lg.loss).epsilon(1e-14));
    CHECK(residual_loss(p, batch, z0, sys) == doctest::Approx(lg.loss).epsilon(1e-12));
    const Vec g = lg.gradient.flatten();
    const auto loss = [&](const MlpParams& q) { return oracle::residual_loss(q, batch, z0, sys); };
    for (long i = 0; i < g.size(); i += 7)
      CHECK(oracle::relative_gap(g(i), oracle::central_difference(p, i, loss)) <= 1e-5);
  }
}

TEST_CASE("supervised fit gradient matches central differences") {
  const Vec z0{{0.2, 0.1, -0.4}};
  const MlpParams p = perturbed(6, 3, 9);
  const std::vector<double> times{0.0, 0.5, 1.0, 2.0};
  Mat targets(3, 4);
  targets << 0.1, 0.2, 0.3, 0.4, -0.1, 0.0, 0.5, 0.9, 1.0, 0.8, 0.6, 0.4;
  const auto loss = [&](const MlpParams& q) {
    double total = 0.0;
    for (std::size_t n = 0; n < times.size(); ++n)
      total += (oracle::state(q, times[n], z0).z - targets.col(long(n))).squaredNorm();
    return total / double(times.size());
  };
  const LossGrad lg = backprop_fit_grad(p, times, targets, z0);
  CHECK(lg.loss == doctest::Approx(loss(p)).epsilon(1e-13));
  const Vec g = lg.gradient.flatten();
  for (long i = 0; i < g.size(); ++i)
    CHECK(oracle::relative_gap(g(i), oracle::central_difference(p, i, loss)) <= 1e-5);
}

TEST_CASE("shape mismatches are configuration errors") {
  const MlpParams p = net(4, 2, 1);
  const std::vector<double> batch{0.0, 1.0};
  CHECK_THROWS_AS(forward(p, 0.5, Vec::Zero(3)), ConfigError);
  CHECK_THROWS_AS(backprop_loss_grad(p, batch, Vec::Zero(2), catalog_get("henon_heiles")), ConfigError);
  CHECK_THROWS_AS(backprop_loss_grad(p, std::vector<double>{}, Vec::Zero(2),
                                     catalog_get("harmonic_oscillator")),
                  ConfigError);
}
