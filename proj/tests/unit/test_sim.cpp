#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fedsched/channel.hpp"
#include "fedsched/error.hpp"
#include "fedsched/sim.hpp"

using namespace fedsched;

namespace {

SimConfig quadratic_config(std::size_t rounds = 30) {
  SimConfig c;
  c.seed = 11;
  c.task.kind = TaskKind::quadratic;
  c.task.dim = 4;
  c.task.noise = 0.1;
  c.network.devices = 8;
  c.schedule.draws = 3;
  c.training.gamma = 0.05;
  c.training.local_steps = 2;
  c.training.rounds = rounds;
  return c;
}

SimConfig softmax_config(std::size_t rounds = 20) {
  SimConfig c;
  c.seed = 5;
  c.task.kind = TaskKind::softmax;
  c.task.dim = 5;
  c.task.classes = 3;
  c.task.samples_per_device = 30;
  c.task.pool_per_class = 50;
  c.task.test_per_class = 20;
  c.network.devices = 6;
  c.schedule.draws = 2;
  c.training.batch_size = 8;
  c.training.local_steps = 2;
  c.training.rounds = rounds;
  c.training.eval_every = 4;
  return c;
}

bool same(const RoundRecord& a, const RoundRecord& b) {
  return a.t == b.t && a.selected == b.selected && a.draws == b.draws &&
         a.comm_time_total == b.comm_time_total && a.cum_time == b.cum_time &&
         a.train_loss == b.train_loss && a.test_accuracy == b.test_accuracy && a.gain == b.gain &&
         a.omega == b.omega && a.q == b.q && a.power == b.power && a.queue == b.queue &&
         a.running_avg_power == b.running_avg_power && a.objective == b.objective;
}

}  // namespace

TEST(Sim, ZeroRounds) {
  auto c = quadratic_config(0);
  const auto r = run(c);
  EXPECT_TRUE(r.records.empty());
  EXPECT_EQ(r.summary.rounds, 0u);
  EXPECT_GT(r.summary.initial_loss, 0.0);
  EXPECT_FALSE(r.summary.final_loss.has_value());
  ASSERT_EQ(r.summary.evals.size(), 1u);
  EXPECT_EQ(r.summary.evals[0].cum_time, 0.0);
}

TEST(Sim, SingleDrawRoundTimeIsOneUpload) {
  auto c = quadratic_config(40);
  c.schedule.draws = 1;
  c.time.tau_comp = 0.0;
  const auto r = run(c);
  const ChannelParams ch = c.channel_params();
  for (const auto& rec : r.records) {
    ASSERT_EQ(rec.selected.size(), 1u);
    const std::size_t d = rec.selected[0];
    EXPECT_EQ(rec.round_time, comm_time(rec.gain[d], rec.power[d], ch));
  }
}

TEST(Sim, TimeAccounting) {
  for (Policy p : {Policy::lyapunov, Policy::uniform, Policy::full}) {
    auto c = quadratic_config(25);
    c.schedule.policy = p;
    c.time.tau_comp = 1.5;
    const auto r = run(c);
    const ChannelParams ch = c.channel_params();
    double cum = 0.0;
    for (const auto& rec : r.records) {
      double comm = 0.0;
      for (auto d : rec.selected) comm += comm_time(rec.gain[d], rec.power[d], ch);
      EXPECT_DOUBLE_EQ(rec.comm_time_total, comm);
      EXPECT_DOUBLE_EQ(rec.round_time, 1.5 + rec.comm_time_total);
      cum += 1.5 + rec.comm_time_total;
      EXPECT_NEAR(rec.cum_time, cum, 1e-12 * cum);
    }
    EXPECT_DOUBLE_EQ(r.summary.total_time, r.records.back().cum_time);
  }
}

TEST(Sim, RunningAveragePower) {
  const auto r = run(quadratic_config(30));
  const std::size_t n = r.records.front().q.size();
  std::vector<double> sum(n, 0.0);
  for (const auto& rec : r.records) {
    for (std::size_t d = 0; d < n; ++d) {
      sum[d] += rec.power[d] * rec.q[d];
      EXPECT_NEAR(rec.running_avg_power[d], sum[d] / static_cast<double>(rec.t + 1),
                  1e-12 * sum[d]);
    }
  }
  EXPECT_EQ(r.summary.final_running_avg_power, r.records.back().running_avg_power);
}

TEST(Sim, QueuesFollowExpectedPower) {
  const auto c = quadratic_config(30);
  const auto r = run(c);
  for (std::size_t t = 0; t + 1 < r.records.size(); ++t) {
    const auto& now = r.records[t];
    const auto& next = r.records[t + 1];
    for (std::size_t d = 0; d < now.q.size(); ++d) {
      const double z = std::max(now.queue[d] + now.power[d] * now.q[d] - c.schedule.p_bar, 0.0);
      EXPECT_DOUBLE_EQ(next.queue[d], z);
    }
  }
  for (double z : r.records.front().queue) EXPECT_EQ(z, 0.0);
}

TEST(Sim, BaselinesKeepQueuesEmpty) {
  auto c = quadratic_config(10);
  c.schedule.policy = Policy::uniform;
  for (const auto& rec : run(c).records) {
    for (double z : rec.queue) EXPECT_EQ(z, 0.0);
  }
  c.schedule.policy = Policy::full;
  for (const auto& rec : run(c).records) EXPECT_EQ(rec.selected.size(), 8u);
}

TEST(Sim, Deterministic) {
  for (const auto& c : {quadratic_config(20), softmax_config(12)}) {
    const auto a = run(c), b = run(c);
    ASSERT_EQ(a.records.size(), b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) EXPECT_TRUE(same(a.records[i], b.records[i]));
    auto other = c;
    other.seed += 1;
    EXPECT_FALSE(same(run(other).records[0], a.records[0]));
  }
}

TEST(Sim, SelectionCountsMatchRecords) {
  const auto r = run(softmax_config(16));
  std::vector<std::uint64_t> counts(6, 0);
  double participants = 0.0;
  for (const auto& rec : r.records) {
    for (auto d : rec.selected) ++counts[d];
    participants += static_cast<double>(rec.selected.size());
    EXPECT_LE(rec.selected.size(), rec.draws);
  }
  EXPECT_EQ(r.summary.selection_counts, counts);
  EXPECT_DOUBLE_EQ(r.summary.mean_participants, participants / 16.0);
}

TEST(Sim, EvaluationSchedule) {
  const auto r = run(softmax_config(10));
  for (const auto& rec : r.records) {
    const bool due = (rec.t + 1) % 4 == 0 || rec.t == 9;
    EXPECT_EQ(rec.train_loss.has_value(), due) << rec.t;
    EXPECT_EQ(rec.test_accuracy.has_value(), due);
  }
  for (const auto& rec : run(quadratic_config(5)).records) EXPECT_TRUE(rec.train_loss.has_value());
}

TEST(Sim, QuadraticBoundReported) {
  auto c = quadratic_config(30);
  c.training.gamma = 0.02;
  c.training.local_steps = 1;
  const auto r = run(c);
  ASSERT_TRUE(r.summary.bound.has_value());
  EXPECT_EQ(r.summary.bound->participation.size(), 30u);
  EXPECT_GT(r.summary.bound->rhs, 0.0);
  EXPECT_GT(r.summary.eps2_estimate, 0.0);
}

TEST(Sim, InvalidConfigRejected) {
  auto c = quadratic_config();
  c.schedule.draws = 0;
  EXPECT_THROW(run(c), ConfigError);
}

TEST(Sim, DivergenceAbortsWithPartialSummary) {
  auto c = quadratic_config(50);
  c.training.gamma = 1e3;
  c.task.curvature_lo = 5.0;
  c.task.curvature_hi = 10.0;
  std::size_t emitted = 0;
  try {
    run(c, [&](const RoundRecord&) { ++emitted; });
    FAIL() << "expected the run to diverge";
  } catch (const RunError& e) {
    EXPECT_EQ(e.summary().rounds, emitted);
    EXPECT_LT(emitted, 50u);
  }
}

TEST(Sim, CorollaryStepSize) {
  auto c = quadratic_config(100);
  c.training.step_size = StepSizeMode::corollary1;
  c.schedule.policy = Policy::uniform;
  const double l = 2.0;
  const double q = 1.0 - std::pow(1.0 - 1.0 / 8.0, 3);
  const double expect = std::min(q / (8.0 * l * 2.0), std::sqrt(8.0 * q) / (std::sqrt(200.0) * l));
  EXPECT_DOUBLE_EQ(resolve_step_size(c, l), expect);
  EXPECT_DOUBLE_EQ(policy_q_min(c), q);
  c.schedule.policy = Policy::full;
  EXPECT_EQ(policy_q_min(c), 1.0);
}

TEST(TimeToTarget, Examples) {
  const Series s{{1.0, 2.0}, {2.0, 1.5}, {3.0, 0.9}, {4.0, 0.8}};
  EXPECT_EQ(time_to_target(s, 3.0, TargetMetric::loss), 1.0);
  EXPECT_FALSE(time_to_target(s, 0.1, TargetMetric::loss).has_value());
  EXPECT_EQ(time_to_target(s, 1.0, TargetMetric::loss), 3.0);
  // Trailing mean of two: (1.5 + 0.9) / 2 = 1.2, (0.9 + 0.8) / 2 = 0.85.
  EXPECT_EQ(time_to_target(s, 1.0, TargetMetric::loss, 2), 4.0);
  const Series acc{{1.0, 0.2}, {2.0, 0.5}, {3.0, 0.7}};
  EXPECT_EQ(time_to_target(acc, 0.6, TargetMetric::accuracy), 3.0);
  EXPECT_THROW(time_to_target(s, 1.0, TargetMetric::loss, 0), DomainError);
}

TEST(TimeToTarget, SummaryUsesFirstRecordConvention) {
  auto c = softmax_config(12);
  c.output.target = 100.0;
  c.output.target_window = 1;
  const auto r = run(c);
  ASSERT_TRUE(r.summary.time_to_target.has_value());
  EXPECT_EQ(*r.summary.time_to_target, r.records[3].cum_time);
  EXPECT_EQ(time_to_target(r.records, 100.0, TargetMetric::loss), r.records[3].cum_time);
  c.output.target = -1.0;
  EXPECT_FALSE(run(c).summary.time_to_target.has_value());
}

TEST(Interpolate, Examples) {
  const std::vector<Series> two{{{0.0, 0.0}, {2.0, 2.0}}, {{0.0, 0.0}, {2.0, 4.0}}};
  const auto avg = interpolate_and_average(two, 1.0, 1);
  ASSERT_EQ(avg.size(), 3u);
  EXPECT_DOUBLE_EQ(avg[0].value, 0.0);
  EXPECT_DOUBLE_EQ(avg[1].value, 1.5);
  EXPECT_DOUBLE_EQ(avg[2].value, 3.0);

  const Series one{{0.0, 1.0}, {1.0, 3.0}, {2.0, 2.0}};
  const auto id = interpolate_and_average(std::vector<Series>{one}, 1.0, 1);
  for (std::size_t i = 0; i < one.size(); ++i) EXPECT_DOUBLE_EQ(id[i].value, one[i].value);
  const auto twice = interpolate_and_average(std::vector<Series>{one, one}, 0.5, 1);
  const auto once = interpolate_and_average(std::vector<Series>{one}, 0.5, 1);
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_DOUBLE_EQ(twice[i].value, once[i].value);

  const auto smooth = interpolate_and_average(std::vector<Series>{one}, 1.0, 2);
  EXPECT_DOUBLE_EQ(smooth[0].value, 1.0);
  EXPECT_DOUBLE_EQ(smooth[1].value, 2.0);
  EXPECT_DOUBLE_EQ(smooth[2].value, 2.5);
}

TEST(Interpolate, NoOverlap) {
  const std::vector<Series> apart{{{0.0, 1.0}, {1.0, 1.0}}, {{2.0, 1.0}, {3.0, 1.0}}};
  EXPECT_THROW(interpolate_and_average(apart, 1.0, 1), DomainError);
}

TEST(Sweep, SingleRowMatchesRun) {
  auto c = softmax_config(12);
  c.output.target = 100.0;
  const auto direct = run(c);
  const std::vector<SweepPoint> points{{"only", c}};
  const auto rows = sweep(points, 2);
  ASSERT_EQ(rows.size(), 1u);
  const auto& row = rows[0];
  EXPECT_EQ(row.label, "only");
  EXPECT_EQ(row.runs_ok, 1u);
  EXPECT_EQ(row.mean_final_loss, *direct.summary.final_loss);
  EXPECT_EQ(row.mean_total_time, direct.summary.total_time);
  EXPECT_EQ(row.mean_participants, direct.summary.mean_participants);
  ASSERT_EQ(row.time_to_target.size(), 1u);
  EXPECT_EQ(row.time_to_target[0], direct.summary.time_to_target);
  EXPECT_EQ(row.mean_time_to_target, *direct.summary.time_to_target);
  EXPECT_TRUE(row.errors.empty());
}

TEST(Sweep, RepeatsUseConsecutiveSeedsAndKeepOrder) {
  auto c = quadratic_config(8);
  c.repeats = 3;
  auto d = c;
  d.schedule.draws = 1;
  const std::vector<SweepPoint> points{{"a", c}, {"b", d}};
  const auto serial = sweep(points, 1);
  const auto parallel = sweep(points, 4);
  ASSERT_EQ(serial.size(), 2u);
  EXPECT_EQ(serial[1].label, "b");
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(serial[i].runs_ok, 3u);
    EXPECT_EQ(serial[i].mean_final_loss, parallel[i].mean_final_loss);
    EXPECT_EQ(serial[i].selection_frequency, parallel[i].selection_frequency);
  }
  double loss = 0.0;
  for (std::uint64_t s = 0; s < 3; ++s) {
    auto one = c;
    one.seed = c.seed + s;
    loss += *run(one).summary.final_loss;
  }
  EXPECT_NEAR(serial[0].mean_final_loss, loss / 3.0, 1e-12);
  EXPECT_TRUE(std::isinf(serial[0].mean_time_to_target));
}

TEST(Sweep, FailuresRecorded) {
  auto c = quadratic_config(80);
  c.training.gamma = 1e3;
  c.task.curvature_lo = 5.0;
  c.task.curvature_hi = 10.0;
  const auto rows = sweep(std::vector<SweepPoint>{{"bad", c}});
  EXPECT_EQ(rows[0].runs_ok, 0u);
  EXPECT_EQ(rows[0].errors.size(), 1u);
  EXPECT_TRUE(std::isinf(rows[0].mean_time_to_target));
}
