#include "fedsched/config.hpp"

#include <cmath>
#include <sstream>

#include "fedsched/error.hpp"

namespace fedsched {

double ScheduleConfig::p_max() const { return std::pow(10.0, p_max_db / 10.0); }

std::vector<ConfigProblem> SimConfig::problems() const {
  std::vector<ConfigProblem> problems;
  auto fail = [&](const char* key, const std::string& why) { problems.push_back({key, why}); };

  if (repeats < 1) fail("repeats", "must be >= 1");

  if (task.dim < 1) fail("task.dim", "must be >= 1");
  if (task.kind == TaskKind::softmax) {
    if (task.classes < 2) fail("task.classes", "must be >= 2");
    if (task.samples_per_device < 1) fail("task.samples_per_device", "must be >= 1");
    if (!(task.alpha >= 0.0)) fail("task.alpha", "must be >= 0 (inf for i.i.d.)");
    if (!(task.class_separation >= 0.0)) fail("task.class_separation", "must be >= 0");
    if (task.pool_per_class < 1) fail("task.pool_per_class", "must be >= 1");
    if (task.test_per_class < 1) fail("task.test_per_class", "must be >= 1");
  }
  if (!(task.noise >= 0.0)) fail("task.noise", "must be >= 0");
  if (!(task.center_spread >= 0.0)) fail("task.center_spread", "must be >= 0");
  if (!(task.curvature_lo >= 0.0)) fail("task.curvature_lo", "must be >= 0");
  if (!(task.curvature_hi >= task.curvature_lo) || !(task.curvature_hi > 0.0)) {
    fail("task.curvature_hi", "must be > 0 and >= curvature_lo");
  }

  if (network.devices < 1) fail("network.devices", "must be >= 1");
  if (!(network.sigma_lo > 0.0)) fail("network.sigma_lo", "must be > 0");
  if (!(network.sigma_hi > 0.0)) fail("network.sigma_hi", "must be > 0");
  if (!(network.noise_power > 0.0)) fail("network.noise_power", "must be > 0");
  if (!(network.bandwidth > 0.0)) fail("network.bandwidth", "must be > 0");
  if (!(network.model_bits >= 1.0)) fail("network.model_bits", "must be >= 1");
  if (!(network.gain_floor > 0.0)) fail("network.gain_floor", "must be > 0");

  if (schedule.draws < 1) fail("schedule.draws", "must be >= 1");
  if (!(schedule.lambda > 0.0)) fail("schedule.lambda", "must be > 0");
  if (!(schedule.v > 0.0)) fail("schedule.v", "must be > 0");
  if (!(schedule.p_bar > 0.0)) fail("schedule.p_bar", "must be > 0");
  if (!std::isfinite(schedule.p_max_db) || !(schedule.p_max() >= schedule.p_bar)) {
    fail("schedule.p_max_db", "peak power must be finite and >= p_bar");
  }
  if (!(schedule.omega_floor_scale > 0.0 && schedule.omega_floor_scale < 1.0)) {
    fail("schedule.omega_floor_scale", "must lie in (0, 1)");
  }
  if (schedule.solver_max_iters < 1) fail("schedule.solver_max_iters", "must be >= 1");
  if (!(schedule.solver_rel_tol > 0.0)) fail("schedule.solver_rel_tol", "must be > 0");
  if (!(schedule.solver_grad_tol > 0.0)) fail("schedule.solver_grad_tol", "must be > 0");

  if (training.step_size == StepSizeMode::fixed && !(training.gamma > 0.0)) {
    fail("training.gamma", "must be > 0");
  }
  if (training.local_steps < 1) fail("training.local_steps", "must be >= 1");
  if (training.batch_size < 1) fail("training.batch_size", "must be >= 1");
  if (training.eval_every < 1) fail("training.eval_every", "must be >= 1");

  if (!(time.tau_comp >= 0.0) || !std::isfinite(time.tau_comp)) {
    fail("time.tau_comp", "must be finite and >= 0");
  }

  if (!(output.grid_step > 0.0)) fail("output.grid_step", "must be > 0");
  if (output.window < 1) fail("output.window", "must be >= 1");
  if (output.target_window < 1) fail("output.target_window", "must be >= 1");
  if (output.target && !std::isfinite(*output.target)) fail("output.target", "must be finite");

  return problems;
}

void SimConfig::validate() const {
  const auto found = problems();
  if (found.empty()) return;
  std::ostringstream msg;
  msg << "invalid configuration:";
  for (const auto& p : found) msg << "\n  " << p.key << ": " << p.message;
  throw ConfigError(msg.str());
}

TaskSpec SimConfig::task_spec() const {
  TaskSpec spec;
  spec.kind = task.kind;
  spec.num_devices = network.devices;
  spec.dim = task.dim;
  spec.batch_size = training.batch_size;
  spec.classes = task.classes;
  spec.samples_per_device = task.samples_per_device;
  spec.alpha = task.alpha;
  spec.class_separation = task.class_separation;
  spec.pool_per_class = task.pool_per_class;
  spec.test_per_class = task.test_per_class;
  spec.noise = task.noise;
  spec.center_spread = task.center_spread;
  spec.curvature_lo = task.curvature_lo;
  spec.curvature_hi = task.curvature_hi;
  return spec;
}

ChannelParams SimConfig::channel_params() const {
  ChannelParams params;
  params.sigma = network.sigma_profile == SigmaProfile::linear
                     ? linear_sigma_profile(network.devices, network.sigma_lo, network.sigma_hi)
                     : std::vector<double>(network.devices, network.sigma_lo);
  params.noise_power = network.noise_power;
  params.bandwidth = network.bandwidth;
  params.model_bits = network.model_bits;
  params.gain_floor = network.gain_floor;
  return params;
}

LyapunovParams SimConfig::lyapunov_params() const {
  return {schedule.v, schedule.lambda, schedule.p_bar, schedule.p_max()};
}

SelectionSolverOptions SimConfig::solver_options() const {
  return {schedule.omega_floor_scale, schedule.solver_max_iters, schedule.solver_rel_tol,
          schedule.solver_grad_tol};
}

const char* to_string(Policy p) {
  switch (p) {
    case Policy::lyapunov: return "lyapunov";
    case Policy::uniform: return "uniform";
    case Policy::full: return "full";
  }
  return "?";
}

const char* to_string(SigmaProfile p) {
  return p == SigmaProfile::linear ? "linear" : "constant";
}

const char* to_string(TargetMetric m) { return m == TargetMetric::loss ? "loss" : "accuracy"; }

const char* to_string(StepSizeMode m) {
  return m == StepSizeMode::fixed ? "fixed" : "corollary1";
}

const char* to_string(TaskKind k) { return k == TaskKind::quadratic ? "quadratic" : "softmax"; }

}  // namespace fedsched
