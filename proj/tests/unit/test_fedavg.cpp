#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "fedsched/error.hpp"
#include "fedsched/fedavg.hpp"
#include "fedsched/rng.hpp"
#include "fedsched/sampling.hpp"
#include "fedsched/task.hpp"

using namespace fedsched;

namespace {

ParticipantSet only(std::size_t n, std::vector<std::size_t> picked) {
  ParticipantSet s;
  s.indicator.assign(n, 0);
  for (auto p : picked) s.indicator[p] = 1;
  s.draw_log = picked;
  return s;
}

QuadraticTask two_devices(double noise = 0.0) {
  return QuadraticTask({{1.0, 2.0}, {0.5, 4.0}}, {{1.0, -1.0}, {2.0, 0.0}}, noise);
}

}  // namespace

TEST(LocalSgd, OneExactStep) {
  const auto task = two_devices();
  Rng rng(1);
  const std::vector<double> x{0.3, 0.7};
  const double gamma = 0.1;
  const auto d = local_sgd(x, 1, task, gamma, 1, rng);
  EXPECT_DOUBLE_EQ(d[0], -gamma * 0.5 * (0.3 - 2.0));
  EXPECT_DOUBLE_EQ(d[1], -gamma * 4.0 * (0.7 - 0.0));
}

TEST(LocalSgd, StationaryAtCenter) {
  const auto task = two_devices();
  Rng rng(2);
  for (int k : {1, 5, 20}) {
    const auto d = local_sgd(std::vector<double>{1.0, -1.0}, 0, task, 0.2, k, rng);
    EXPECT_EQ(d, std::vector<double>(2, 0.0));
  }
}

TEST(LocalSgd, SoftmaxDescends) {
  TaskSpec s;
  s.num_devices = 4;
  s.dim = 5;
  s.classes = 3;
  s.samples_per_device = 50;
  s.pool_per_class = 80;
  s.test_per_class = 10;
  s.batch_size = 10;
  int improved = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto task = SoftmaxTask::generate(s, rng);
    const auto x = task.initial_params();
    const auto d = local_sgd(x, 1, task, 0.05, 5, rng);
    std::vector<double> y(x);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += d[i];
    improved += task.device_loss(1, y) <= task.device_loss(1, x);
  }
  EXPECT_GE(improved, 19);
}

TEST(LocalSgd, DivergenceReported) {
  const QuadraticTask task({{1e200}}, {{0.0}}, 0.0);
  Rng rng(3);
  try {
    local_sgd(std::vector<double>{1.0}, 0, task, 1e200, 3, rng);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.device(), 0u);
  }
}

TEST(Aggregate, SingleDevice) {
  const GlobalModel m{{1.0, 2.0}, 3};
  const std::vector<DeviceUpdate> up{{0, {0.5, -0.5}}};
  const auto next = aggregate(m, up, only(1, {0}), SelectionProbs({1.0}, 1));
  EXPECT_EQ(next.params, (std::vector<double>{1.5, 1.5}));
  EXPECT_EQ(next.round, 4u);
}

TEST(Aggregate, FullParticipationIsMean) {
  const GlobalModel m{{0.0}, 0};
  const std::vector<DeviceUpdate> up{{0, {1.0}}, {1, {2.0}}, {2, {6.0}}};
  const auto next = aggregate(m, up, only(3, {0, 1, 2}), SelectionProbs::full_participation(3));
  EXPECT_DOUBLE_EQ(next.params[0], 3.0);
}

TEST(Aggregate, ConsistencyChecks) {
  const GlobalModel m{{0.0}, 0};
  const SelectionProbs p({0.5, 0.5}, 2);
  EXPECT_THROW(aggregate(m, std::vector<DeviceUpdate>{{0, {1.0}}}, only(2, {0, 1}), p),
               ConsistencyError);
  EXPECT_THROW(aggregate(m, std::vector<DeviceUpdate>{{0, {1.0}}, {1, {1.0}}}, only(2, {0}), p),
               ConsistencyError);
  EXPECT_THROW(aggregate(m, std::vector<DeviceUpdate>{{0, {1.0}}, {0, {1.0}}}, only(2, {0}), p),
               ConsistencyError);
  EXPECT_THROW(aggregate(m, std::vector<DeviceUpdate>{{0, {1.0, 2.0}}}, only(2, {0}), p),
               ConsistencyError);
}

TEST(Aggregate, UnbiasedUnderRedraws) {
  const std::size_t n = 5;
  Rng rng(4);
  std::vector<double> w(n);
  double total = 0.0;
  for (double& x : w) total += (x = 0.2 + rng.uniform());
  for (double& x : w) x /= total;
  const SelectionProbs probs(w, 4);
  std::vector<DeviceUpdate> all;
  std::vector<double> expect(3, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    all.push_back({i, {0.5 + rng.uniform(), 0.5 + rng.uniform(), 0.5 + rng.uniform()}});
    for (int k = 0; k < 3; ++k) expect[k] += all.back().delta[k] / n;
  }
  const GlobalModel m{{0.0, 0.0, 0.0}, 0};
  std::vector<double> mean(3, 0.0);
  const int redraws = 100000;
  for (int r = 0; r < redraws; ++r) {
    const auto s = draw_participants(probs, rng);
    std::vector<DeviceUpdate> up;
    for (auto dev : s.selected()) up.push_back(all[dev]);
    const auto next = aggregate(m, up, s, probs);
    for (int k = 0; k < 3; ++k) mean[k] += next.params[k] / redraws;
  }
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(mean[k], expect[k], 0.01 * expect[k]);
}

TEST(Aggregate, FullParticipationMatchesGradientDescent) {
  TaskSpec s;
  s.kind = TaskKind::quadratic;
  s.num_devices = 6;
  s.dim = 4;
  Rng rng(5);
  const auto task = QuadraticTask::generate(s, rng);
  const double gamma = 0.5 / task.smoothness();
  const auto probs = SelectionProbs::full_participation(6);
  GlobalModel model{task.initial_params(), 0};
  std::vector<double> x = model.params, g(4);
  double prev_loss = task.loss(x);
  for (int step = 0; step < 50; ++step) {
    const auto set = draw_participants(probs, rng);
    std::vector<DeviceUpdate> up;
    for (auto dev : set.selected()) up.push_back({dev, local_sgd(model.params, dev, task, gamma, 1, rng)});
    model = aggregate(model, up, set, probs);
    task.full_gradient(x, g);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] -= gamma * g[i];
      EXPECT_NEAR(model.params[i], x[i], 1e-12);
    }
    const double loss = task.loss(model.params);
    EXPECT_LE(loss, prev_loss);
    prev_loss = loss;
  }
}
