#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fedsched/channel.hpp"
#include "fedsched/sampling.hpp"

namespace fedsched {

struct LyapunovParams {
  double v = 100.0;       // drift-plus-penalty weight
  double lambda = 100.0;  // communication time vs. convergence trade-off
  double p_bar = 1.0;     // time-average power budget (W), same for every device
  double p_max = 3162.2776601683795;  // peak power (W), 35 dB

  void validate() const;
};

// Virtual power queues Z_n >= 0, one per device.
struct VirtualQueues {
  std::vector<double> z;

  explicit VirtualQueues(std::size_t n = 0) : z(n, 0.0) {}
};

struct SelectionSolverOptions {
  double omega_floor_scale = 1e-6;  // omega_n >= omega_floor_scale / N
  int max_iters = 500;      // per multiplier search
  double rel_tol = 1e-12;   // relative width of the multiplier bracket / fixed-point step
  double grad_tol = 1e-12;  // |sum omega - 1| accepted before the final projection

  double omega_floor(std::size_t n) const { return omega_floor_scale / static_cast<double>(n); }
  void validate() const;
};

struct SelectionResult {
  SelectionProbs probs;
  double objective = 0.0;  // sum_n A_n / q_n + B_n q_n
  int iterations = 0;
  bool converged = false;
};

struct SchedulerDecision {
  SelectionProbs probs;
  std::vector<double> power;    // W
  std::vector<double> coeff_a;  // A_n
  std::vector<double> coeff_b;  // B_n
  double objective_value = 0.0; // sum_n A_n / q_n + B_n q_n + C_n
  int solver_iters = 0;
  bool solver_converged = true;
};

// Per-device power objective V lambda l / (B log2(1 + g P / N0)) + z P.
double power_objective(double power, double gain, double z, const LyapunovParams& params,
                       const ChannelParams& channel);

// Closed-form minimizer of power_objective over (0, P_max]: the interior
// stationary point from the principal Lambert W branch, compared against
// the P_max endpoint. Returns P_max when z == 0. Never returns 0.
double optimal_power(double gain, double z, const LyapunovParams& params,
                     const ChannelParams& channel);

// Minimizes sum_n A_n / q_n + B_n q_n, q_n = 1 - (1 - omega_n)^m, over
// {sum omega = 1, omega_n >= floor}. Each term is convex up to an inflection
// point and concave beyond it, so a minimizer has a common multiplier mu with
// every device on its convex branch, except at most one device that absorbs
// the leftover mass on its concave branch. Both families are searched and the
// lower objective wins; init is returned if nothing beats it.
SelectionResult solve_selection(std::span<const double> coeff_a, std::span<const double> coeff_b,
                                int m, std::span<const double> init,
                                const SelectionSolverOptions& options = {});

// Objective of solve_selection evaluated at omega.
double selection_objective(std::span<const double> coeff_a, std::span<const double> coeff_b,
                           int m, std::span<const double> omega);

// One drift-plus-penalty round: optimal powers, then selection probabilities
// from a uniform start.
SchedulerDecision decide_round(const ChannelState& state, const VirtualQueues& queues,
                               const LyapunovParams& params, const ChannelParams& channel, int m,
                               const SelectionSolverOptions& options = {});

// Z_n <- max(Z_n + P_n q_n - P_bar, 0), using expected power P_n q_n.
VirtualQueues update_queues(const VirtualQueues& queues, const SchedulerDecision& decision,
                            const LyapunovParams& params);

// Uniform sampling with replacement: omega_n = 1/N, q_n = 1 - (1 - 1/N)^m,
// P_n = min(P_max, P_bar / q_n).
SchedulerDecision uniform_policy(int m, std::size_t n, const LyapunovParams& params);

// Every device participates with q_n = 1 at P_n = min(P_max, P_bar).
SchedulerDecision full_participation_policy(std::size_t n, const LyapunovParams& params);

}  // namespace fedsched
