#include "fedsched/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "fedsched/error.hpp"
#include "fedsched/numerics.hpp"

namespace fedsched {

void LyapunovParams::validate() const {
  std::ostringstream problems;
  if (!(v > 0.0)) problems << " V must be > 0;";
  if (!(lambda > 0.0)) problems << " lambda must be > 0;";
  if (!(p_bar > 0.0)) problems << " p_bar must be > 0;";
  if (!(p_max >= p_bar) || !std::isfinite(p_max)) problems << " p_max must be finite and >= p_bar;";
  if (!problems.str().empty()) throw ConfigError("invalid Lyapunov parameters:" + problems.str());
}

void SelectionSolverOptions::validate() const {
  if (!(omega_floor_scale > 0.0 && omega_floor_scale < 1.0) || max_iters < 1 ||
      !(rel_tol > 0.0) || !(grad_tol > 0.0)) {
    throw ConfigError("invalid selection solver options");
  }
}

double power_objective(double power, double gain, double z, const LyapunovParams& params,
                       const ChannelParams& channel) {
  const double rate = std::log1p(gain * power / channel.noise_power) / std::numbers::ln2;
  return params.v * params.lambda * channel.model_bits / (channel.bandwidth * rate) + z * power;
}

double optimal_power(double gain, double z, const LyapunovParams& params,
                     const ChannelParams& channel) {
  if (!(gain > 0.0) || !std::isfinite(gain)) {
    throw DomainError("optimal_power: gain must be finite and > 0");
  }
  if (!(z >= 0.0) || !std::isfinite(z)) {
    throw DomainError("optimal_power: queue backlog must be finite and >= 0");
  }
  // No queue pressure: the objective is strictly decreasing in P.
  if (z == 0.0) return params.p_max;

  // Stationarity of the objective in x = 1 + g P / N0 reads x ln(x)^2 = A.
  const double a = params.v * params.lambda * channel.model_bits * gain * std::numbers::ln2 /
                   (channel.noise_power * channel.bandwidth * z);
  if (std::isnan(a) || a <= 0.0) {
    std::ostringstream msg;
    msg << "optimal_power: invalid A=" << a << " (z=" << z << ", gain=" << gain << ")";
    throw NumericError(msg.str());
  }
  if (std::isinf(a)) return params.p_max;

  // ln(x) = 2 W0(sqrt(A / 4)), equivalently x = (A / 4) W0(sqrt(A / 4))^-2.
  const double w = lambert_w0(std::sqrt(a / 4.0));
  double interior = channel.noise_power / gain * std::expm1(2.0 * w);
  if (std::isnan(interior)) {
    std::ostringstream msg;
    msg << "optimal_power: non-finite interior point (A=" << a << ", z=" << z
        << ", gain=" << gain << ")";
    throw NumericError(msg.str());
  }
  interior = std::clamp(interior, std::numeric_limits<double>::min(), params.p_max);

  const double at_interior = power_objective(interior, gain, z, params, channel);
  const double at_max = power_objective(params.p_max, gain, z, params, channel);
  return at_interior <= at_max ? interior : params.p_max;
}

double selection_objective(std::span<const double> coeff_a, std::span<const double> coeff_b,
                           int m, std::span<const double> omega) {
  double total = 0.0;
  for (std::size_t n = 0; n < omega.size(); ++n) {
    const double q = q_from_omega(omega[n], m);
    total += coeff_a[n] / q + coeff_b[n] * q;
  }
  return total;
}

namespace {

// One separable term f(w) = a / q(w) + b q(w) with q(w) = 1 - (1 - w)^m, on [lo, hi].
// f is convex on [lo, w_peak] (f' < 0 below w_star, > 0 above) and concave on
// [w_peak, hi] when m >= 2.
struct Term {
  double a = 0.0;
  double b = 0.0;
  int m = 1;
  double lo = 0.0;
  double hi = 1.0;
  double w_star = 0.0;
  double w_peak = 0.0;
  double slope_lo = 0.0;
  double slope_peak = 0.0;

  double q(double w) const { return q_from_omega(w, m); }
  double slope(double w) const {
    const double qv = q(w);
    const double dq = m == 1 ? 1.0 : m * std::exp((m - 1) * std::log1p(-w));
    return (b - a / (qv * qv)) * dq;
  }
  double curvature(double w) const {
    const double qv = q(w);
    const double s = 1.0 - w;
    const double dq = m == 1 ? 1.0 : m * std::pow(s, m - 1);
    const double d2q = m <= 1 ? 0.0 : -static_cast<double>(m) * (m - 1) * std::pow(s, m - 2);
    return 2.0 * a / (qv * qv * qv) * dq * dq + (b - a / (qv * qv)) * d2q;
  }
  double value(double w) const {
    const double qv = q(w);
    return a / qv + b * qv;
  }
};

Term make_term(double a, double b, int m, double lo, double hi) {
  Term t{a, b, m, lo, hi};
  const double q_star = b > a ? std::sqrt(a / b) : 1.0;
  t.w_star = std::clamp(q_star >= 1.0 ? 1.0 : omega_from_q(q_star, m), lo, hi);
  t.w_peak = hi;
  if (m >= 2 && q_star < 1.0 && t.w_star < hi) {
    // Inflection: sign change of 2 a m s^m / q^3 - (b - a / q^2)(m - 1), s = 1 - w.
    auto convex_side = [&](double w) {
      const double qv = t.q(w);
      const double s = 1.0 - w;
      return 2.0 * a * m * std::pow(s, m) / (qv * qv * qv) - (b - a / (qv * qv)) * (m - 1) > 0.0;
    };
    double l = t.w_star;
    double r = 1.0;
    for (int i = 0; i < 200 && r - l > 1e-16; ++i) {
      const double mid = 0.5 * (l + r);
      (convex_side(mid) ? l : r) = mid;
    }
    t.w_peak = std::min(l, hi);
  }
  t.slope_lo = t.slope(lo);
  t.slope_peak = t.slope(t.w_peak);
  return t;
}

// Root of f'(w) = mu on the convex branch [lo, w_peak]; clamps at the ends.
double convex_root(const Term& t, double mu, double guess) {
  if (t.slope_lo >= mu) return t.lo;
  if (t.slope_peak <= mu) return t.w_peak;
  double l = t.lo;
  double r = t.w_peak;
  double x = std::clamp(guess, l, r);
  if (x <= l || x >= r) x = std::sqrt(l * r);
  for (int i = 0; i < 200; ++i) {
    const double g = t.slope(x) - mu;
    if (g == 0.0) return x;
    (g < 0.0 ? l : r) = x;
    if (r - l <= 4.0 * std::numeric_limits<double>::epsilon() * r) break;
    const double d = t.curvature(x);
    double next = d > 0.0 ? x - g / d : l;
    if (!(next > l && next < r)) next = r > 2.0 * l ? std::sqrt(l * r) : 0.5 * (l + r);
    if (std::abs(next - x) <= 1e-15 * x) {
      x = next;
      break;
    }
    x = next;
  }
  return x;
}

class MultiplierSystem {
 public:
  explicit MultiplierSystem(std::vector<Term> terms)
      : terms_(std::move(terms)), roots_(terms_.size()) {
    for (std::size_t n = 0; n < terms_.size(); ++n) roots_[n] = terms_[n].w_star;
  }

  // Sum of convex-branch roots; fills roots().
  double sum(double mu) {
    double total = 0.0;
    for (std::size_t n = 0; n < terms_.size(); ++n) {
      roots_[n] = convex_root(terms_[n], mu, roots_[n]);
      total += roots_[n];
    }
    return total;
  }

  // d sum / d mu at the roots last computed.
  double sum_slope() const {
    double total = 0.0;
    for (std::size_t n = 0; n < terms_.size(); ++n) {
      const Term& t = terms_[n];
      if (roots_[n] > t.lo && roots_[n] < t.w_peak) total += 1.0 / t.curvature(roots_[n]);
    }
    return total;
  }

  const std::vector<double>& roots() const { return roots_; }
  const std::vector<Term>& terms() const { return terms_; }

 private:
  std::vector<Term> terms_;
  std::vector<double> roots_;
};

struct Candidate {
  std::vector<double> omega;
  double objective = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

double objective_of(const std::vector<Term>& terms, std::span<const double> omega) {
  double total = 0.0;
  for (std::size_t n = 0; n < terms.size(); ++n) total += terms[n].value(omega[n]);
  return total;
}

// Every device on its convex branch with a common multiplier: solves sum(mu) = 1
// for mu in [mu_l, mu_r], where sum(mu_l) <= 1 <= sum(mu_r).
Candidate all_convex(MultiplierSystem& system, double mu_l, double mu_r,
                     const SelectionSolverOptions& options) {
  Candidate c;
  double scale = 1.0;
  for (const auto& t : system.terms()) scale = std::max(scale, std::abs(t.slope_peak));
  auto to_u = [&](double mu) { return std::asinh(mu / scale); };
  auto from_u = [&](double u) { return scale * std::sinh(u); };

  double mu = mu_r;
  double residual = system.sum(mu) - 1.0;
  for (c.iterations = 1; c.iterations <= options.max_iters; ++c.iterations) {
    if (std::abs(residual) <= options.grad_tol) {
      c.converged = true;
      break;
    }
    (residual < 0.0 ? mu_l : mu_r) = mu;
    if (mu_r - mu_l <= options.rel_tol * std::max(std::abs(mu_l), std::abs(mu_r))) {
      c.converged = true;
      break;
    }
    const double slope = system.sum_slope();
    double next = slope > 0.0 ? mu - residual / slope : mu_l;
    if (!(next > mu_l && next < mu_r)) next = from_u(0.5 * (to_u(mu_l) + to_u(mu_r)));
    if (!(next > mu_l && next < mu_r)) next = 0.5 * (mu_l + mu_r);
    mu = next;
    residual = system.sum(mu) - 1.0;
  }
  c.omega = system.roots();
  return c;
}

// Device j absorbs the mass the others leave at their convex-branch roots; the
// common multiplier is the fixed point mu = f_j'(1 - sum_{n != j} w_n(mu)),
// approached monotonically from mu = 0.
Candidate absorber(MultiplierSystem& system, std::size_t j, const SelectionSolverOptions& options) {
  Candidate c;
  const Term& tj = system.terms()[j];
  double mu = 0.0;
  for (c.iterations = 1; c.iterations <= options.max_iters; ++c.iterations) {
    const double others = system.sum(mu) - system.roots()[j];
    const double leftover = 1.0 - others;
    if (!(leftover >= tj.lo && leftover <= tj.hi)) return c;
    c.omega = system.roots();
    c.omega[j] = leftover;
    const double next = tj.slope(leftover);
    if (std::abs(next - mu) <= options.rel_tol * std::max(std::abs(next), 1e-300)) {
      c.converged = true;
      break;
    }
    mu = next;
  }
  return c;
}

}  // namespace

SelectionResult solve_selection(std::span<const double> coeff_a, std::span<const double> coeff_b,
                                int m, std::span<const double> init,
                                const SelectionSolverOptions& options) {
  options.validate();
  const std::size_t n = init.size();
  if (n == 0 || coeff_a.size() != n || coeff_b.size() != n) {
    throw DomainError("solve_selection: coefficient and init sizes must match and be non-empty");
  }
  if (m < 1) throw DomainError("solve_selection: m must be >= 1");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(coeff_a[i] > 0.0) || !std::isfinite(coeff_a[i])) {
      throw DomainError("solve_selection: A_n must be finite and > 0");
    }
    if (!(coeff_b[i] >= 0.0) || !std::isfinite(coeff_b[i])) {
      throw DomainError("solve_selection: B_n must be finite and >= 0");
    }
  }
  const double init_total = std::accumulate(init.begin(), init.end(), 0.0);
  if (std::abs(init_total - 1.0) > 1e-9 ||
      std::any_of(init.begin(), init.end(), [](double w) { return !(w > 0.0); })) {
    throw DomainError("solve_selection: init must be a positive probability vector");
  }

  SelectionResult result;
  if (n == 1) {
    result.probs = SelectionProbs(std::vector<double>{1.0}, m);
    result.objective = selection_objective(coeff_a, coeff_b, m, result.probs.omega());
    result.converged = true;
    return result;
  }

  const double lo = options.omega_floor(n);
  const double hi = 1.0 - static_cast<double>(n - 1) * lo;
  std::vector<Term> terms;
  terms.reserve(n);
  double star_total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    terms.push_back(make_term(coeff_a[i], coeff_b[i], m, lo, hi));
    star_total += terms.back().w_star;
  }
  MultiplierSystem system(terms);

  std::vector<Candidate> candidates;
  if (star_total >= 1.0) {
    // Every optimum lies below the unconstrained minimizers, where the problem is convex.
    double mu_l = 0.0;
    for (const auto& t : terms) mu_l = std::min(mu_l, t.slope_lo);
    candidates.push_back(all_convex(system, mu_l - 1.0, 0.0, options));
  } else {
    // Every optimum lies above them; at most one device sits on its concave branch.
    double mu_r = 0.0;
    double peak_total = 0.0;
    for (const auto& t : terms) {
      mu_r = std::max(mu_r, t.slope_peak);
      peak_total += t.w_peak;
    }
    if (peak_total >= 1.0) candidates.push_back(all_convex(system, 0.0, mu_r, options));
    if (m >= 2) {
      const bool equal_a = std::all_of(coeff_a.begin(), coeff_a.end(), [&](double a) {
        return std::abs(a - coeff_a[0]) <= 1e-12 * coeff_a[0];
      });
      if (equal_a) {
        // With equal A_n, exchanging two devices' omega shows the absorber has the smallest B_n.
        const auto j = static_cast<std::size_t>(
            std::min_element(coeff_b.begin(), coeff_b.end()) - coeff_b.begin());
        candidates.push_back(absorber(system, j, options));
      } else {
        for (std::size_t j = 0; j < n; ++j) candidates.push_back(absorber(system, j, options));
      }
    }
  }

  Candidate best;
  best.omega.assign(init.begin(), init.end());
  best.objective = selection_objective(coeff_a, coeff_b, m, best.omega);
  int iterations = 0;
  for (auto& c : candidates) {
    iterations += c.iterations;
    if (c.omega.empty()) continue;
    c.omega = project_to_floored_simplex(c.omega, lo);
    c.objective = objective_of(terms, c.omega);
    if (c.objective <= best.objective) best = std::move(c);
  }
  if (!std::isfinite(best.objective)) {
    throw NumericError("solve_selection: non-finite objective at the solution");
  }

  result.probs = SelectionProbs(std::move(best.omega), m);
  result.objective = best.objective;
  result.iterations = iterations;
  result.converged = best.converged;
  return result;
}

SchedulerDecision decide_round(const ChannelState& state, const VirtualQueues& queues,
                               const LyapunovParams& params, const ChannelParams& channel, int m,
                               const SelectionSolverOptions& options) {
  const std::size_t n = state.gains.size();
  if (n == 0 || queues.z.size() != n) {
    throw DomainError("decide_round: channel state and queues must cover the same devices");
  }
  SchedulerDecision decision;
  decision.power.resize(n);
  decision.coeff_a.assign(n, params.v / static_cast<double>(n));
  decision.coeff_b.resize(n);
  double constant = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = optimal_power(state.gains[i], queues.z[i], params, channel);
    decision.power[i] = p;
    decision.coeff_b[i] = power_objective(p, state.gains[i], queues.z[i], params, channel);
    constant -= queues.z[i] * params.p_bar;
  }

  const std::vector<double> uniform(n, 1.0 / static_cast<double>(n));
  SelectionResult solved = solve_selection(decision.coeff_a, decision.coeff_b, m, uniform, options);
  decision.probs = std::move(solved.probs);
  decision.objective_value = solved.objective + constant;
  decision.solver_iters = solved.iterations;
  decision.solver_converged = solved.converged;
  return decision;
}

VirtualQueues update_queues(const VirtualQueues& queues, const SchedulerDecision& decision,
                            const LyapunovParams& params) {
  const std::size_t n = queues.z.size();
  if (decision.power.size() != n || decision.probs.size() != n) {
    throw DomainError("update_queues: decision size does not match queues");
  }
  VirtualQueues next(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double expected_power = decision.power[i] * decision.probs.q()[i];
    next.z[i] = std::max(queues.z[i] + expected_power - params.p_bar, 0.0);
  }
  return next;
}

SchedulerDecision uniform_policy(int m, std::size_t n, const LyapunovParams& params) {
  if (n == 0) throw DomainError("uniform_policy: no devices");
  if (m < 1) throw DomainError("uniform_policy: m must be >= 1");
  SchedulerDecision decision;
  decision.probs = SelectionProbs(std::vector<double>(n, 1.0 / static_cast<double>(n)), m);
  decision.power.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    decision.power[i] = std::min(params.p_max, params.p_bar / decision.probs.q()[i]);
  }
  return decision;
}

SchedulerDecision full_participation_policy(std::size_t n, const LyapunovParams& params) {
  SchedulerDecision decision;
  decision.probs = SelectionProbs::full_participation(n);
  decision.power.assign(n, std::min(params.p_max, params.p_bar));
  return decision;
}

}  // namespace fedsched
