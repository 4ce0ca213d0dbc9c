#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fedsched/channel.hpp"
#include "fedsched/scheduler.hpp"
#include "fedsched/task.hpp"

namespace fedsched {

enum class Policy { lyapunov, uniform, full };
enum class SigmaProfile { linear, constant };
enum class TargetMetric { loss, accuracy };
enum class StepSizeMode { fixed, corollary1 };

struct TaskConfig {
  TaskKind kind = TaskKind::softmax;
  std::size_t dim = 20;
  std::size_t classes = 10;
  std::size_t samples_per_device = 500;
  double alpha = std::numeric_limits<double>::infinity();
  double class_separation = 0.6;
  std::size_t pool_per_class = 1000;
  std::size_t test_per_class = 200;
  double noise = 0.0;
  double center_spread = 1.0;
  double curvature_lo = 0.5;
  double curvature_hi = 2.0;

  bool operator==(const TaskConfig&) const = default;
};

struct NetworkConfig {
  std::size_t devices = 100;
  SigmaProfile sigma_profile = SigmaProfile::linear;
  double sigma_lo = 0.1;  // constant profile uses sigma_lo for every device
  double sigma_hi = 10.0;
  double noise_power = 1.0;
  double bandwidth = 22e6;
  double model_bits = 32.0 * 555178.0;
  double gain_floor = 1e-3;

  bool operator==(const NetworkConfig&) const = default;
};

struct ScheduleConfig {
  Policy policy = Policy::lyapunov;
  int draws = 10;  // m
  double lambda = 100.0;
  double v = 100.0;
  double p_bar = 1.0;
  double p_max_db = 35.0;
  double omega_floor_scale = 1e-6;
  int solver_max_iters = 500;
  double solver_rel_tol = 1e-12;
  double solver_grad_tol = 1e-12;

  // 10^(p_max_db / 10) W
  double p_max() const;
  bool operator==(const ScheduleConfig&) const = default;
};

struct TrainingConfig {
  StepSizeMode step_size = StepSizeMode::fixed;
  double gamma = 0.01;
  int local_steps = 10;  // K
  std::size_t batch_size = 32;
  std::size_t rounds = 1000;  // T
  std::size_t eval_every = 10;

  bool operator==(const TrainingConfig&) const = default;
};

struct TimeConfig {
  double tau_comp = 0.0;  // seconds per round, devices compute in parallel

  bool operator==(const TimeConfig&) const = default;
};

struct OutputConfig {
  std::string dir = "out";
  double grid_step = 1.0;       // seconds, for interpolated series
  std::size_t window = 20;      // trailing average over grid points
  TargetMetric target_metric = TargetMetric::loss;
  std::optional<double> target; // time-to-target threshold
  std::size_t target_window = 3;  // trailing average over evaluations for time-to-target
  bool device_detail = false;   // also write the per-device CSV

  bool operator==(const OutputConfig&) const = default;
};

struct ConfigProblem {
  std::string key;  // dotted path, e.g. "schedule.draws"
  std::string message;
};

struct SimConfig {
  std::uint64_t seed = 1;
  std::size_t repeats = 1;
  TaskConfig task;
  NetworkConfig network;
  ScheduleConfig schedule;
  TrainingConfig training;
  TimeConfig time;
  OutputConfig output;

  // Every violated invariant, in declaration order.
  std::vector<ConfigProblem> problems() const;
  // Throws one ConfigError listing every problem.
  void validate() const;

  TaskSpec task_spec() const;
  ChannelParams channel_params() const;
  LyapunovParams lyapunov_params() const;
  SelectionSolverOptions solver_options() const;

  bool operator==(const SimConfig&) const = default;
};

const char* to_string(Policy p);
const char* to_string(SigmaProfile p);
const char* to_string(TargetMetric m);
const char* to_string(StepSizeMode m);
const char* to_string(TaskKind k);

}  // namespace fedsched
