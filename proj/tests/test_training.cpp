#include "dynnet/error.hpp"
#include "dynnet/training.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace dynnet;

namespace {

const Vec kZ0{{1.0, 0.0}};

MlpParams small_net(std::uint64_t seed = 1, int h = 16) {
  const std::vector<int> sizes{1, h, h, 2};
  return init_params(sizes, seed);
}

}  // namespace

TEST_CASE("batches keep both endpoints and sort interior draws") {
  TrainConfig c;
  c.horizon = 1.0;
  c.batch_size = 2;
  Rng rng(3);
  const std::vector<double> b = sample_batch(c, rng);
  REQUIRE(b.size() == 3);
  CHECK(b.front() == 0.0);
  CHECK(b.back() == 1.0);
  CHECK(b[1] > 0.0);
  CHECK(b[1] < 1.0);

  c.batch_size = 64;
  c.horizon = 2.5;
  Rng r1(9), r2(9);
  const auto x = sample_batch(c, r1);
  CHECK(x == sample_batch(c, r2));
  CHECK(x.size() == 65);
  CHECK(std::is_sorted(x.begin(), x.end()));
}

TEST_CASE("interior points are uniform on (0, T)") {
  TrainConfig c;
  c.horizon = 1.0;
  c.batch_size = 10000;
  Rng rng(5);
  const auto b = sample_batch(c, rng);
  double sum = 0.0;
  for (std::size_t i = 1; i + 1 < b.size(); ++i) sum += b[i];
  const double mean = sum / double(b.size() - 2);
  CHECK(mean >= 0.49);
  CHECK(mean <= 0.51);
}

TEST_CASE("config validation") {
  TrainConfig c;
  c.batch_size = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.horizon = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.optimizer.beta1 = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("adam and sgd updates match hand computation") {
  MlpParams p = small_net(2, 2);
  const Vec w0 = p.flatten();
  MlpParams g = p.zeros_like();
  Vec gv = Vec::LinSpaced(w0.size(), -1.0, 2.0);
  g.assign(gv);

  OptimizerConfig sgd{OptimizerKind::Sgd, 0.1};
  Optimizer s(sgd, p.size());
  MlpParams q = p;
  s.step(q, g);
  CHECK((q.flatten() - (w0 - 0.1 * gv)).norm() <= 1e-15);

  OptimizerConfig adam;
  Optimizer a(adam, p.size());
  q = p;
  Vec m = Vec::Zero(w0.size()), v = Vec::Zero(w0.size()), w = w0;
  for (int step = 1; step <= 3; ++step) {
    a.step(q, g);
    m = 0.9 * m + 0.1 * gv;
    v = 0.999 * v + 0.001 * gv.cwiseAbs2();
    const double c1 = 1.0 - std::pow(0.9, step), c2 = 1.0 - std::pow(0.999, step);
    for (long i = 0; i < w.size(); ++i) w(i) -= 1e-3 * (m(i) / c1) / (std::sqrt(v(i) / c2) + 1e-8);
  }
  CHECK((q.flatten() - w).norm() <= 1e-14);
}

TEST_CASE("train_step records decomposed loss; zero rate leaves weights") {
  const SystemDef sys = catalog_get("harmonic_oscillator");
  TrainConfig c;
  c.optimizer.kind = OptimizerKind::Sgd;
  c.optimizer.learning_rate = 0.0;
  Rng rng(1);
  MlpParams p = small_net();
  const MlpParams before = p;
  Optimizer opt(c.optimizer, p.size());
  const auto batch = sample_batch(c, rng);
  const TrainRecord rec = train_step(p, batch, kZ0, sys, opt, 0);
  CHECK(p == before);
  CHECK(rec.loss == doctest::Approx(residual_loss(before, batch, kZ0, sys)).epsilon(1e-13));
  CHECK(std::abs(rec.loss_components.sum() - rec.loss) <= 1e-12);
  CHECK(rec.loss_components.size() == 2);
}

TEST_CASE("two thousand Adam iterations cut the loss a hundredfold") {
  const SystemDef sys = catalog_get("harmonic_oscillator");
  TrainConfig c;
  c.max_iters = 2000;
  c.loss_target = 0.0;
  const TrainResult r = train_until(init_params(std::vector<int>{1, 32, 32, 2}, 1), c, kZ0, sys);
  REQUIRE(r.history.size() == 2000);
  CHECK(r.history.back().loss * 100.0 <= r.history.front().loss);
  for (std::size_t i = 0; i < r.history.size(); ++i) {
    CHECK(r.history[i].iter == int(i));
    CHECK(std::abs(r.history[i].loss_components.sum() - r.history[i].loss) <= 1e-12);
  }
}

TEST_CASE("train_until termination rules") {
  const SystemDef sys = catalog_get("harmonic_oscillator");
  const MlpParams p = small_net();
  TrainConfig c;
  c.loss_target = std::numeric_limits<double>::infinity();
  TrainResult r = train_until(p, c, kZ0, sys);
  CHECK(r.iterations <= 1);
  CHECK(r.converged);

  c = {};
  c.max_iters = 0;
  r = train_until(p, c, kZ0, sys);
  CHECK(r.params == p);
  CHECK(r.history.empty());
  CHECK_FALSE(r.converged);

  c = {};
  c.max_iters = 50;
  c.loss_target = 0.0;
  r = train_until(p, c, kZ0, sys);
  CHECK(r.iterations == 50);
  CHECK_FALSE(r.converged);
  CHECK_FALSE(r.abort_reason);
}

TEST_CASE("snapshot cadence") {
  const SystemDef sys = catalog_get("harmonic_oscillator");
  TrainConfig c;
  c.loss_target = 0.0;
  c.snapshot_every = 10;
  for (int iters : {0, 9, 10, 100, 105}) {
    c.max_iters = iters;
    const TrainResult r = train_until(small_net(), c, kZ0, sys);
    CHECK(r.snapshots.size() == std::size_t(iters / 10 + 1));
    CHECK(r.snapshots.front().iter == 0);
    CHECK(r.snapshots.front().weights == small_net().flatten());
    if (iters >= 10) CHECK(r.snapshots.back().iter == (iters / 10) * 10);
  }
}

TEST_CASE("identical seeds give bit-identical histories") {
  const SystemDef sys = catalog_get("nonlinear_pendulum");
  TrainConfig c;
  c.max_iters = 200;
  c.seed = 77;
  const TrainResult a = train_until(small_net(4), c, kZ0, sys);
  const TrainResult b = train_until(small_net(4), c, kZ0, sys);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].loss == b.history[i].loss);
    CHECK(a.history[i].loss_components == b.history[i].loss_components);
  }
  CHECK(a.params == b.params);
}

TEST_CASE("monitor stops the run") {
  const SystemDef sys = catalog_get("harmonic_oscillator");
  TrainConfig c;
  c.max_iters = 1000;
  TrainHooks hooks;
  hooks.monitor_every = 25;
  std::vector<int> seen;
  hooks.monitor = [&](const MlpParams&, int updates) {
    seen.push_back(updates);
    return updates >= 75;
  };
  const TrainResult r = train_until(small_net(), c, kZ0, sys, hooks);
  CHECK(r.stopped_by_monitor);
  CHECK(r.iterations == 75);
  CHECK(seen == std::vector<int>{25, 50, 75});
}

TEST_CASE("non-finite loss aborts with the history so far") {
  SystemDef bad = catalog_get("harmonic_oscillator");
  int calls = 0;
  bad.f = [&calls](const Vec& z) -> Vec {
    ++calls;
    return calls > 200 ? Vec::Constant(z.size(), std::nan("")) : Vec{{z(1), -z(0)}};
  };
  TrainConfig c;
  c.batch_size = 8;
  c.max_iters = 100;
  const TrainResult r = train_until(small_net(), c, kZ0, bad);
  REQUIRE(r.abort_reason);
  CHECK(r.abort_reason->find("iteration") != std::string::npos);
  CHECK(r.history.size() == 22);
}
