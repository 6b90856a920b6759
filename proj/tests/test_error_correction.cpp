#include "dynnet/error.hpp"
#include "dynnet/error_correction.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

using namespace dynnet;

namespace {

MlpParams zero_net(int d, int h = 8) {
  MlpParams p = init_params(std::vector<int>{1, h, h, d}, 1);
  p.assign(Vec::Zero(p.size()));
  return p;
}

MlpParams perturbed(int d, std::uint64_t seed, double scale = 0.05) {
  MlpParams p = init_params(std::vector<int>{1, 12, 12, d}, seed);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  Vec w = p.flatten();
  for (long i = 0; i < w.size(); ++i) w(i) += n(rng);
  p.assign(w);
  return p;
}

SystemDef riccati() {
  SystemDef s;
  s.name = "riccati";
  s.dim = 1;
  s.f = [](const Vec& z) -> Vec { return z.cwiseAbs2(); };
  s.jacobian = [](const Vec& z) -> Mat { return Mat::Constant(1, 1, 2.0 * z(0)); };
  s.hessian = [](const Vec&) { return HessianTensor{Mat::Constant(1, 1, 2.0)}; };
  return s;
}

}  // namespace

TEST_CASE("residual profile grid") {
  const SystemDef sys = catalog_get("harmonic_oscillator");
  const MlpParams p = perturbed(2, 3);
  const Vec z0{{1.0, 0.0}};
  const ResidualProfile prof = residual_profile(p, z0, sys, 0.3, 1.0);
  REQUIRE(prof.times.size() == 5);
  CHECK(prof.step == doctest::Approx(0.25));
  CHECK(prof.times.back() == 1.0);
  double worst = 0.0;
  for (std::size_t n = 0; n < prof.times.size(); ++n) {
    const oracle::State s = oracle::state(p, prof.times[n], z0);
    const Vec r = s.z_dot - sys.f(s.z);
    CHECK((prof.residuals.row(long(n)).transpose() - r).norm() <= 1e-13);
    worst = std::max(worst, r.norm());
  }
  CHECK(prof.l_max == doctest::Approx(worst).epsilon(1e-12));
  CHECK_THROWS_AS(residual_profile(p, z0, sys, 2.0, 1.0), ConfigError);
  CHECK_THROWS_AS(residual_profile(p, z0, sys, 0.0, 1.0), ConfigError);
}

TEST_CASE("zero network on the harmonic oscillator matches the closed form") {
  const SystemDef sys = catalog_get("harmonic_oscillator");
  const Vec z0{{1.0, 0.0}};
  const double horizon = 3.14159265358979323846;
  const ResidualProfile prof = residual_profile(zero_net(2), z0, sys, 1e-4, horizon);
  for (int order : {1, 2}) {
    const ErrorEstimate est = estimate_delta_z(prof, sys, {order});
    double worst = 0.0;
    for (std::size_t n = 0; n < est.times.size(); ++n) {
      const double t = est.times[n];
      worst = std::max({worst, std::abs(est.delta_z(long(n), 0) - (std::cos(t) - 1.0)),
                        std::abs(est.delta_z(long(n), 1) + std::sin(t))});
    }
    CHECK(worst <= 1e-3);
    CHECK(est.sigma_min == doctest::Approx(1.0).epsilon(1e-14));
  }
  const BoundReport b = error_bound(prof, sys);
  CHECK(b.sigma_min == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(b.l_max == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(b.bound == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("order-2 recursion is exact for the cubic Henon-Heiles potential") {
  // F is quadratic, so F(z_hat + dz) = F(z_hat) + F_z dz + dz^T F_zz dz / 2 with no
  // remainder; the estimate must equal Euler's method on dz' = F(z_hat + dz) - z_hat'.
  const SystemDef sys = catalog_get("henon_heiles");
  const Vec z0{{0.1, 0.0, 0.0, 0.3}};
  const MlpParams p = perturbed(4, 8);
  const ResidualProfile prof = residual_profile(p, z0, sys, 1e-3, 1.0);
  const ErrorEstimate est = estimate_delta_z(prof, sys, {2});
  Vec dz = Vec::Zero(4);
  double worst = 0.0;
  for (std::size_t n = 0; n + 1 < prof.times.size(); ++n) {
    const oracle::State s = oracle::state(p, prof.times[n], z0);
    dz += (prof.times[n + 1] - prof.times[n]) * (sys.f(s.z + dz) - s.z_dot);
    worst = std::max(worst, (est.delta_z.row(long(n + 1)).transpose() - dz).cwiseAbs().maxCoeff());
  }
  CHECK(worst <= 1e-12);
  CHECK(dz.norm() > 1e-3);  // the check is not vacuous

  const ErrorEstimate first = estimate_delta_z(prof, sys, {1});
  CHECK((first.delta_z - est.delta_z).cwiseAbs().maxCoeff() > 1e-9);
}

TEST_CASE("linear systems make both orders identical") {
  const SystemDef sys = catalog_get("harmonic_oscillator");
  const ResidualProfile prof = residual_profile(perturbed(2, 4), Vec{{1.0, 0.0}}, sys, 1e-3, 2.0);
  CHECK(estimate_delta_z(prof, sys, {1}).delta_z == estimate_delta_z(prof, sys, {2}).delta_z);
}

TEST_CASE("sigma_min follows the pendulum Jacobian") {
  const SystemDef sys = catalog_get("nonlinear_pendulum");
  const ResidualProfile prof = residual_profile(zero_net(2), Vec{{1.2, 0.0}}, sys, 0.1, 1.0);
  const BoundReport b = error_bound(prof, sys);
  CHECK(b.sigma_min == doctest::Approx(std::cos(1.2)).epsilon(1e-12));
  CHECK(b.bound == doctest::Approx(b.l_max / std::cos(1.2)).epsilon(1e-12));
  CHECK_FALSE(b.vacuous);

  const ResidualProfile flat =
      residual_profile(zero_net(2), Vec{{1.5707963267948966, 0.0}}, sys, 0.1, 1.0);
  const BoundReport v = error_bound(flat, sys);
  CHECK(v.vacuous);
  CHECK(std::isinf(v.bound));
  CHECK_FALSE(v.note.empty());
}

TEST_CASE("estimator divergence reports its time") {
  const SystemDef sys = riccati();
  const ResidualProfile prof = residual_profile(zero_net(1), Vec::Ones(1), sys, 1e-3, 3.0);
  try {
    estimate_delta_z(prof, sys, {2});
    FAIL("expected divergence");
  } catch (const EstimatorDivergence& e) {
    CHECK(e.time() > 0.5);
    CHECK(e.time() < 1.5);
    CHECK(std::string(e.what()).find("refine") != std::string::npos);
  }
  SystemDef no_hessian = catalog_get("harmonic_oscillator");
  no_hessian.hessian = nullptr;
  const ResidualProfile p2 = residual_profile(zero_net(2), Vec{{1.0, 0.0}}, no_hessian, 0.1, 1.0);
  CHECK_THROWS_AS(estimate_delta_z(p2, no_hessian, {2}), ConfigError);
  CHECK_NOTHROW(estimate_delta_z(p2, no_hessian, {1}));
}

TEST_CASE("error-corrected dataset") {
  const SystemDef sys = catalog_get("harmonic_oscillator");
  const Vec z0{{1.0, 0.0}};
  const MlpParams p = perturbed(2, 6);
  const ResidualProfile prof = residual_profile(p, z0, sys, 1e-3, 1.0);
  const ErrorEstimate est = estimate_delta_z(prof, sys);
  const EcDataset ec = build_ec_dataset(p, est, z0, 10, 10, 42);
  REQUIRE(ec.times.size() == 100);
  CHECK(ec.times.front() == 0.0);
  CHECK(ec.times.back() == 1.0);
  CHECK(ec.source_iter == 42);
  const Mat pred = predict(p, ec.times, z0).transpose();
  CHECK((ec.z_hat - pred).norm() == 0.0);
  CHECK((ec.z_ec - (ec.z_hat + ec.delta_z)).norm() == 0.0);
  for (std::size_t i = 1; i < ec.times.size(); ++i)
    CHECK(ec.times[i] - ec.times[i - 1] == doctest::Approx(1.0 / 99.0).epsilon(0.02));
  CHECK_THROWS_AS(build_ec_dataset(p, est, z0, 100, 20), ConfigError);

  Rng rng(4);
  const std::vector<int> batch = sample_ec_batch(ec, 30, rng);
  REQUIRE(batch.size() == 31);
  CHECK(batch.front() == 0);
  CHECK(batch.back() == 99);
  CHECK(std::set<int>(batch.begin(), batch.end()).size() == 31);
  CHECK(std::is_sorted(batch.begin(), batch.end()));
  CHECK_THROWS_AS(sample_ec_batch(ec, 100, rng), ConfigError);
  CHECK(sample_ec_batch(ec, 99, rng).size() == 100);

  const auto loss = [&](const MlpParams& q) {
    double total = 0.0;
    for (int idx : batch)
      total += (oracle::state(q, ec.times[std::size_t(idx)], z0).z - ec.z_ec.row(idx).transpose())
                   .squaredNorm();
    return total / double(batch.size());
  };
  const LossGrad lg = surrogate_loss_grad(p, ec, batch, z0);
  CHECK(lg.loss == doctest::Approx(loss(p)).epsilon(1e-12));
  const Vec g = lg.gradient.flatten();
  for (long i = 0; i < g.size(); i += 5)
    CHECK(oracle::relative_gap(g(i), oracle::central_difference(p, i, loss)) <= 1e-5);
}

TEST_CASE("phase-B batches do not repeat at k = 2") {
  const SystemDef sys = catalog_get("harmonic_oscillator");
  const Vec z0{{1.0, 0.0}};
  const MlpParams p = perturbed(2, 3);
  const ErrorEstimate est = estimate_delta_z(residual_profile(p, z0, sys, 1e-3, M_PI), sys);
  const EcDataset ec = build_ec_dataset(p, est, z0, 2, 100);
  Rng rng(8);
  std::set<std::vector<int>> seen;
  for (int i = 0; i < 10000; ++i) seen.insert(sample_ec_batch(ec, 100, rng));
  CHECK(seen.size() == 10000);
}

TEST_CASE("phase schedule validation") {
  PhaseSchedule s;
  CHECK_NOTHROW(s.validate());
  s.tau_refresh = s.tau_enter;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.taylor_order = 3;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.burst_iters = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("phased training: phase B never touches F") {
  InstrumentedSystem counted = instrument(catalog_get("harmonic_oscillator"));
  const Vec z0{{1.0, 0.0}};
  PhaseSchedule sched;
  sched.tau_enter = 5e-2;
  sched.tau_refresh = 1e-6;
  sched.phase_b_max_iters = 40;
  sched.burst_iters = 5;
  sched.max_cycles = 2;
  sched.grid_step = 1e-3;
  TrainConfig c;
  c.batch_size = 32;
  c.max_iters = 1500;
  c.loss_target = 0.0;

  long mark = 0, phase_b_evals = 0, phase_b_updates = 0;
  TrainHooks hooks;
  hooks.phase_b_batch = [&](std::span<const int> batch) {
    CHECK(batch.size() == 33);
    mark = counted.counters->total();
  };
  hooks.on_update = [&](const TrainRecord& rec) {
    if (rec.phase != Phase::B) return;
    ++phase_b_updates;
    phase_b_evals += counted.counters->total() - mark;
  };
  const MlpParams start = init_params(std::vector<int>{1, 16, 16, 2}, 2);
  const PhasedResult r = phased_train(start, sched, c, z0, counted.system, hooks);
  REQUIRE_FALSE(r.train.abort_reason);
  REQUIRE(r.cycles.size() == 2);
  CHECK(phase_b_updates > 0);
  CHECK(phase_b_evals == 0);
  CHECK(r.train.iterations == 1500);

  // A... then per cycle B... burst x5, then A to the end.
  std::string tags;
  for (const TrainRecord& rec : r.train.history) {
    const std::string t = phase_name(rec.phase);
    if (tags.empty() || tags.substr(tags.rfind(' ') + 1) != t) tags += " " + t;
  }
  CHECK(tags == " A B burst A B burst A");
  long bursts = 0;
  for (const TrainRecord& rec : r.train.history) bursts += rec.phase == Phase::Burst;
  CHECK(bursts == 10);
  for (const CycleInfo& info : r.cycles) {
    CHECK(info.residual_loss <= sched.tau_enter);
    CHECK(info.phase_b_iters >= 1);
    CHECK(info.phase_b_iters <= sched.phase_b_max_iters);
  }

  const PhasedResult again = phased_train(start, sched, c, z0, catalog_get("harmonic_oscillator"));
  CHECK(again.train.params == r.train.params);
}
