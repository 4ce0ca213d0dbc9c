#include "fedsched/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "fedsched/channel.hpp"
#include "fedsched/error.hpp"
#include "fedsched/fedavg.hpp"
#include "fedsched/rng.hpp"
#include "fedsched/sampling.hpp"
#include "fedsched/scheduler.hpp"
#include "fedsched/task.hpp"

namespace fedsched {

double policy_q_min(const SimConfig& config) {
  const std::size_t n = config.network.devices;
  switch (config.schedule.policy) {
    case Policy::full:
      return 1.0;
    case Policy::uniform:
      return q_from_omega(1.0 / static_cast<double>(n), config.schedule.draws);
    case Policy::lyapunov:
      return q_from_omega(config.solver_options().omega_floor(n), config.schedule.draws);
  }
  return 1.0;
}

double resolve_step_size(const SimConfig& config, double smoothness) {
  if (config.training.step_size == StepSizeMode::fixed) return config.training.gamma;
  return corollary1_stepsize(smoothness, config.training.local_steps, config.network.devices,
                             std::max<std::size_t>(config.training.rounds, 1),
                             policy_q_min(config));
}

namespace {

SchedulerDecision decide(const SimConfig& config, const ChannelState& state,
                         const VirtualQueues& queues, const LyapunovParams& lyapunov,
                         const ChannelParams& channel, const SelectionSolverOptions& options) {
  switch (config.schedule.policy) {
    case Policy::lyapunov:
      return decide_round(state, queues, lyapunov, channel, config.schedule.draws, options);
    case Policy::uniform:
      return uniform_policy(config.schedule.draws, config.network.devices, lyapunov);
    case Policy::full:
      return full_participation_policy(config.network.devices, lyapunov);
  }
  throw ConfigError("unknown policy");
}

}  // namespace

RunSummary run(const SimConfig& config, const RecordSink& sink) {
  config.validate();
  const std::size_t n = config.network.devices;

  Rng partition_rng = Rng::from_label(config.seed, "partition");
  Rng channel_rng = Rng::from_label(config.seed, "channel");
  Rng sampling_rng = Rng::from_label(config.seed, "sampling");
  const Rng sgd_rng = Rng::from_label(config.seed, "sgd");

  const std::unique_ptr<Task> task = make_task(config.task_spec(), partition_rng);
  const ChannelParams channel = config.channel_params();
  channel.validate();
  const LyapunovParams lyapunov = config.lyapunov_params();
  lyapunov.validate();
  const SelectionSolverOptions options = config.solver_options();
  const bool quadratic = task->kind() == TaskKind::quadratic;

  RunSummary summary;
  summary.seed = config.seed;
  summary.policy = config.schedule.policy;
  summary.gamma = resolve_step_size(config, task->smoothness());
  summary.selection_counts.assign(n, 0);
  summary.final_running_avg_power.assign(n, 0.0);

  GlobalModel model{task->initial_params(), 0};
  summary.initial_loss = task->loss(model.params);
  summary.initial_accuracy = task->test_accuracy(model.params);
  summary.evals.push_back({0, 0.0, summary.initial_loss, summary.initial_accuracy});

  VirtualQueues queues(n);
  std::vector<double> power_sum(n, 0.0);
  std::vector<double> participation_terms;
  double min_q = 1.0;
  double cum_time = 0.0;
  double participants_total = 0.0;

  auto fail = [&](const std::string& what) -> RunError {
    summary.final_queue = queues.z;
    summary.total_time = cum_time;
    summary.mean_participants =
        summary.rounds > 0 ? participants_total / static_cast<double>(summary.rounds) : 0.0;
    return RunError(what, summary);
  };

  for (std::size_t t = 0; t < config.training.rounds; ++t) {
    RoundRecord record;
    record.t = t;
    const ChannelState state = draw_channel(channel, channel_rng, t);

    SchedulerDecision decision;
    try {
      decision = decide(config, state, queues, lyapunov, channel, options);
    } catch (const NumericError& e) {
      std::ostringstream msg;
      msg << "round " << t << ": scheduler failed: " << e.what();
      throw fail(msg.str());
    }

    const ParticipantSet participants = draw_participants(decision.probs, sampling_rng);
    record.selected = participants.selected();
    record.draws = participants.draw_log.size();

    std::vector<DeviceUpdate> updates;
    updates.reserve(record.selected.size());
    for (std::size_t dev : record.selected) {
      Rng local_rng = sgd_rng.fork(static_cast<std::uint64_t>(t) * n + dev);
      try {
        updates.push_back({dev, local_sgd(model.params, dev, *task, summary.gamma,
                                          config.training.local_steps, local_rng)});
      } catch (const DivergenceError& e) {
        std::ostringstream msg;
        msg << "round " << t << ": " << e.what();
        throw fail(msg.str());
      }
    }
    model = aggregate(model, updates, participants, decision.probs);
    if (!std::all_of(model.params.begin(), model.params.end(),
                     [](double x) { return std::isfinite(x); })) {
      std::ostringstream msg;
      msg << "round " << t << ": global model diverged after aggregation";
      throw fail(msg.str());
    }

    for (std::size_t dev : record.selected) {
      record.comm_time_total += comm_time(state.gains[dev], decision.power[dev], channel);
    }
    record.comp_time = config.time.tau_comp;
    record.round_time = record.comp_time + record.comm_time_total;
    cum_time += record.round_time;
    record.cum_time = cum_time;

    record.gain = state.gains;
    record.omega = decision.probs.omega();
    record.q = decision.probs.q();
    record.power = decision.power;
    record.queue = queues.z;
    record.realized_power.assign(n, 0.0);
    record.running_avg_power.resize(n);
    for (std::size_t dev = 0; dev < n; ++dev) {
      if (participants.indicator[dev]) {
        record.realized_power[dev] = decision.power[dev];
        ++summary.selection_counts[dev];
      }
      power_sum[dev] += decision.power[dev] * record.q[dev];
      record.running_avg_power[dev] = power_sum[dev] / static_cast<double>(t + 1);
      min_q = std::min(min_q, record.q[dev]);
    }
    record.objective = decision.objective_value;
    record.solver_iters = decision.solver_iters;
    record.solver_converged = decision.solver_converged;

    if (config.schedule.policy == Policy::lyapunov) {
      queues = update_queues(queues, decision, lyapunov);
    }
    if (quadratic) participation_terms.push_back(participation_term(record.q));

    const bool last = t + 1 == config.training.rounds;
    if (quadratic || (t + 1) % config.training.eval_every == 0 || last) {
      record.train_loss = task->loss(model.params);
      record.test_accuracy = task->test_accuracy(model.params);
      summary.evals.push_back({t + 1, cum_time, *record.train_loss, record.test_accuracy});
      summary.final_loss = record.train_loss;
      summary.final_accuracy = record.test_accuracy;
    }

    ++summary.rounds;
    participants_total += static_cast<double>(record.selected.size());
    summary.total_comm_time += record.comm_time_total;
    if (!decision.solver_converged) ++summary.solver_nonconverged;
    summary.final_running_avg_power = record.running_avg_power;
    if (sink) sink(record);
  }

  summary.total_time = cum_time;
  summary.final_queue = queues.z;
  summary.mean_participants =
      summary.rounds > 0 ? participants_total / static_cast<double>(summary.rounds) : 0.0;
  if (config.output.target) {
    // The t = 0 baseline is not a round; a target met from the start resolves
    // to the first evaluated round, as for records.
    const Series series = metric_series(std::span<const EvalPoint>(summary.evals).subspan(1),
                                        config.output.target_metric);
    summary.time_to_target = time_to_target(series, *config.output.target,
                                            config.output.target_metric,
                                            config.output.target_window);
  }

  if (quadratic && summary.rounds > 0 && summary.final_loss) {
    const auto& quad = static_cast<const QuadraticTask&>(*task);
    summary.eps2_estimate = quad.gradient_divergence(quad.optimum());
    BoundParams bp;
    bp.gamma = summary.gamma;
    bp.local_steps = config.training.local_steps;
    bp.smoothness = quad.smoothness();
    bp.nu2 = quad.noise() * quad.noise();
    bp.eps2 = summary.eps2_estimate;
    bp.q_min = min_q;
    try {
      summary.bound = evaluate_bound_from_terms(bp, participation_terms, summary.initial_loss,
                                                *summary.final_loss, summary.rounds, n);
    } catch (const ConfigError&) {
      // Step size outside the bound's validity range; nothing to report.
    }
  }
  return summary;
}

RunResult run(const SimConfig& config) {
  RunResult result;
  result.summary = run(config, [&](const RoundRecord& r) { result.records.push_back(r); });
  return result;
}

// ---------------------------------------------------------------------------

Series metric_series(std::span<const RoundRecord> records, TargetMetric metric) {
  Series out;
  for (const auto& r : records) {
    const auto& value = metric == TargetMetric::loss ? r.train_loss : r.test_accuracy;
    if (value) out.push_back({r.cum_time, *value});
  }
  return out;
}

Series metric_series(std::span<const EvalPoint> evals, TargetMetric metric) {
  Series out;
  for (const auto& e : evals) {
    if (metric == TargetMetric::loss) {
      out.push_back({e.cum_time, e.loss});
    } else if (e.accuracy) {
      out.push_back({e.cum_time, *e.accuracy});
    }
  }
  return out;
}

std::optional<double> time_to_target(std::span<const SeriesPoint> series, double target,
                                     TargetMetric metric, std::size_t window) {
  if (window < 1) throw DomainError("time_to_target: window must be >= 1");
  double sum = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    sum += series[i].value;
    if (i >= window) sum -= series[i - window].value;
    const double mean = sum / static_cast<double>(std::min(i + 1, window));
    const bool reached = metric == TargetMetric::loss ? mean <= target : mean >= target;
    if (reached) return series[i].time;
  }
  return std::nullopt;
}

std::optional<double> time_to_target(std::span<const RoundRecord> records, double target,
                                     TargetMetric metric, std::size_t window) {
  const Series series = metric_series(records, metric);
  return time_to_target(series, target, metric, window);
}

namespace {

double interpolate(const Series& run, double time) {
  auto upper = std::lower_bound(run.begin(), run.end(), time,
                                [](const SeriesPoint& p, double t) { return p.time < t; });
  if (upper == run.begin()) return upper->value;
  if (upper == run.end()) return run.back().value;
  const auto lower = upper - 1;
  if (upper->time == time) return upper->value;
  const double frac = (time - lower->time) / (upper->time - lower->time);
  return lower->value + frac * (upper->value - lower->value);
}

}  // namespace

Series interpolate_and_average(std::span<const Series> runs, double grid_step, std::size_t window) {
  if (runs.empty()) throw DomainError("interpolate_and_average: no runs");
  if (!(grid_step > 0.0)) throw DomainError("interpolate_and_average: grid_step must be > 0");
  if (window < 1) throw DomainError("interpolate_and_average: window must be >= 1");

  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (const auto& r : runs) {
    if (r.empty()) throw DomainError("interpolate_and_average: a run has no samples");
    lo = std::max(lo, r.front().time);
    hi = std::min(hi, r.back().time);
  }
  if (lo > hi) {
    std::ostringstream msg;
    msg << "interpolate_and_average: runs do not overlap in time (latest start " << lo
        << " s, earliest end " << hi << " s)";
    throw DomainError(msg.str());
  }

  const auto steps = static_cast<std::size_t>(std::floor((hi - lo) / grid_step * (1.0 + 1e-12)));
  Series averaged;
  averaged.reserve(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    const double time = lo + static_cast<double>(k) * grid_step;
    double total = 0.0;
    for (const auto& r : runs) total += interpolate(r, time);
    averaged.push_back({time, total / static_cast<double>(runs.size())});
  }

  Series smoothed(averaged.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < averaged.size(); ++i) {
    sum += averaged[i].value;
    if (i >= window) sum -= averaged[i - window].value;
    smoothed[i] = {averaged[i].time, sum / static_cast<double>(std::min(i + 1, window))};
  }
  return smoothed;
}

// ---------------------------------------------------------------------------

namespace {

struct SweepSlot {
  std::optional<RunSummary> summary;
  std::string error;
};

SweepSlot run_slot(const SimConfig& config) {
  SweepSlot slot;
  try {
    slot.summary = run(config, nullptr);
  } catch (const RunError& e) {
    slot.error = e.what();
  } catch (const std::exception& e) {
    slot.error = e.what();
  }
  return slot;
}

}  // namespace

std::vector<SweepRow> sweep(std::span<const SweepPoint> points, std::size_t jobs) {
  std::vector<std::pair<std::size_t, SimConfig>> work;
  for (std::size_t p = 0; p < points.size(); ++p) {
    for (std::size_t r = 0; r < points[p].config.repeats; ++r) {
      SimConfig cfg = points[p].config;
      cfg.seed = points[p].config.seed + r;
      work.emplace_back(p, std::move(cfg));
    }
  }

  std::vector<SweepSlot> slots(work.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < work.size(); i = next++) slots[i] = run_slot(work[i].second);
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(work.size(), 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  }

  std::vector<SweepRow> rows(points.size());
  std::vector<std::vector<double>> counts(points.size());
  std::vector<double> rounds_total(points.size(), 0.0);
  for (std::size_t p = 0; p < points.size(); ++p) {
    rows[p].label = points[p].label;
    counts[p].assign(points[p].config.network.devices, 0.0);
  }

  for (std::size_t i = 0; i < work.size(); ++i) {
    const std::size_t p = work[i].first;
    SweepRow& row = rows[p];
    const SweepSlot& slot = slots[i];
    if (!slot.summary) {
      std::ostringstream msg;
      msg << "seed " << work[i].second.seed << ": " << slot.error;
      row.errors.push_back(msg.str());
      row.time_to_target.push_back(std::nullopt);
      continue;
    }
    const RunSummary& s = *slot.summary;
    ++row.runs_ok;
    row.time_to_target.push_back(s.time_to_target);
    row.mean_final_loss += s.final_loss.value_or(s.initial_loss);
    row.mean_final_accuracy += s.final_accuracy.value_or(s.initial_accuracy.value_or(0.0));
    row.mean_participants += s.mean_participants;
    row.mean_total_time += s.total_time;
    for (std::size_t d = 0; d < s.selection_counts.size(); ++d) {
      counts[p][d] += static_cast<double>(s.selection_counts[d]);
    }
    rounds_total[p] += static_cast<double>(s.rounds);
  }

  for (std::size_t p = 0; p < points.size(); ++p) {
    SweepRow& row = rows[p];
    const double ok = static_cast<double>(row.runs_ok);
    if (row.runs_ok > 0) {
      row.mean_final_loss /= ok;
      row.mean_final_accuracy /= ok;
      row.mean_participants /= ok;
      row.mean_total_time /= ok;
    }
    const bool all_reached = !row.time_to_target.empty() &&
                             std::all_of(row.time_to_target.begin(), row.time_to_target.end(),
                                         [](const auto& v) { return v.has_value(); });
    if (all_reached) {
      double total = 0.0;
      for (const auto& v : row.time_to_target) total += *v;
      row.mean_time_to_target = total / static_cast<double>(row.time_to_target.size());
    } else {
      row.mean_time_to_target = std::numeric_limits<double>::infinity();
    }

    row.selection_frequency.assign(counts[p].size(), 0.0);
    if (rounds_total[p] > 0.0) {
      for (std::size_t d = 0; d < counts[p].size(); ++d) {
        row.selection_frequency[d] = counts[p][d] / rounds_total[p];
      }
      const auto [lo, hi] = std::minmax_element(counts[p].begin(), counts[p].end());
      row.selection_max_min_ratio =
          *lo > 0.0 ? *hi / *lo : std::numeric_limits<double>::infinity();
    }
  }
  return rows;
}

}  // namespace fedsched
