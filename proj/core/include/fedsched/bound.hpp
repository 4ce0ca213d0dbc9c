#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fedsched {

// Constants entering the non-convex convergence bound for FedAvg with
// arbitrary participation probabilities.
struct BoundParams {
  double gamma = 0.01;
  int local_steps = 1;  // K
  double smoothness = 1.0;  // L
  double nu2 = 0.0;     // stochastic gradient variance bound
  double eps2 = 0.0;    // gradient divergence bound
  double q_min = 1.0;
};

struct BoundReport {
  double c = 0.0;  // 1 - 30 gamma^2 K^2 L^2
  double phi1 = 0.0;
  double phi2 = 0.0;
  std::vector<double> participation;  // Q_t = (1/N) sum_n 1/q_n^t
  double mean_participation = 0.0;    // Q
  double optimization_term = 0.0;     // 2 (f0 - fT) / (c gamma K T)
  double rhs = 0.0;
  bool step_size_ok = true;  // gamma <= q_min / (8 L K)
};

// Q_t for one round's marginals.
double participation_term(std::span<const double> q);

// Right-hand side of the bound on (1/T) sum_t E||grad f(x_t)||^2:
//   2 (f0 - fT) / (c gamma K T) + Phi1 + (Phi2 / N) Q.
// Throws ConfigError when c <= 0 (step too large for the bound to apply).
// A step size above q_min / (8 L K) only clears step_size_ok.
BoundReport evaluate_bound(const BoundParams& bp, std::span<const std::vector<double>> q_history,
                           double f0, double f_final, std::size_t rounds, std::size_t num_devices);

// Same, from precomputed Q_t values.
BoundReport evaluate_bound_from_terms(const BoundParams& bp, std::span<const double> participation,
                                      double f0, double f_final, std::size_t rounds,
                                      std::size_t num_devices);

// min{ q_min / (8 L K), sqrt(N q_min) / (sqrt(T K) L) }
double corollary1_stepsize(double smoothness, int local_steps, std::size_t num_devices,
                           std::size_t rounds, double q_min);

}  // namespace fedsched
