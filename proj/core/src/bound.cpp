#include "fedsched/bound.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fedsched/error.hpp"

namespace fedsched {

double participation_term(std::span<const double> q) {
  if (q.empty()) throw DomainError("participation_term: empty q");
  double total = 0.0;
  for (double v : q) {
    if (!(v > 0.0 && v <= 1.0)) throw DomainError("participation_term: q must lie in (0, 1]");
    total += 1.0 / v;
  }
  return total / static_cast<double>(q.size());
}

BoundReport evaluate_bound(const BoundParams& bp, std::span<const std::vector<double>> q_history,
                           double f0, double f_final, std::size_t rounds, std::size_t num_devices) {
  std::vector<double> terms;
  terms.reserve(q_history.size());
  for (const auto& q : q_history) terms.push_back(participation_term(q));
  return evaluate_bound_from_terms(bp, terms, f0, f_final, rounds, num_devices);
}

BoundReport evaluate_bound_from_terms(const BoundParams& bp, std::span<const double> participation,
                                      double f0, double f_final, std::size_t rounds,
                                      std::size_t num_devices) {
  if (!(bp.gamma > 0.0) || bp.local_steps < 1 || !(bp.smoothness > 0.0) ||
      !(bp.q_min > 0.0 && bp.q_min <= 1.0) || !(bp.nu2 >= 0.0) || !(bp.eps2 >= 0.0)) {
    throw ConfigError("evaluate_bound: invalid bound parameters");
  }
  if (rounds < 1 || num_devices < 1) throw ConfigError("evaluate_bound: need T >= 1 and N >= 1");

  const double k = bp.local_steps;
  const double l = bp.smoothness;
  BoundReport report;
  report.c = 1.0 - 30.0 * bp.gamma * bp.gamma * k * k * l * l;
  if (!(report.c > 0.0)) {
    std::ostringstream msg;
    msg << "evaluate_bound: c = 1 - 30 gamma^2 K^2 L^2 = " << report.c
        << " <= 0; step size too large for the bound";
    throw ConfigError(msg.str());
  }
  report.step_size_ok = bp.gamma <= bp.q_min / (8.0 * l * k);
  report.phi1 = 5.0 * bp.gamma * bp.gamma * k * l * l * (bp.nu2 + 6.0 * k * bp.eps2) / report.c;
  report.phi2 = 2.0 * l * bp.gamma * bp.nu2 / report.c;
  report.participation.assign(participation.begin(), participation.end());
  double total = 0.0;
  for (double q : participation) total += q;
  report.mean_participation =
      participation.empty() ? 0.0 : total / static_cast<double>(participation.size());
  report.optimization_term =
      2.0 * (f0 - f_final) / (report.c * bp.gamma * k * static_cast<double>(rounds));
  report.rhs = report.optimization_term + report.phi1 +
               report.phi2 / static_cast<double>(num_devices) * report.mean_participation;
  return report;
}

double corollary1_stepsize(double smoothness, int local_steps, std::size_t num_devices,
                           std::size_t rounds, double q_min) {
  if (!(smoothness > 0.0) || local_steps < 1 || num_devices < 1 || rounds < 1 || !(q_min > 0.0)) {
    throw DomainError("corollary1_stepsize: all arguments must be positive");
  }
  const double k = local_steps;
  const double first = q_min / (8.0 * smoothness * k);
  const double second = std::sqrt(static_cast<double>(num_devices) * q_min) /
                        (std::sqrt(static_cast<double>(rounds) * k) * smoothness);
  return std::min(first, second);
}

}  // namespace fedsched
