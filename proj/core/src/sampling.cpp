#include "fedsched/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fedsched/error.hpp"

namespace fedsched {

namespace {

void check_draws(int m) {
  if (m < 1) {
    std::ostringstream msg;
    msg << "number of draws must be >= 1, got " << m;
    throw DomainError(msg.str());
  }
}

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    std::ostringstream msg;
    msg << what << " must lie in [0, 1], got " << p;
    throw DomainError(msg.str());
  }
}

}  // namespace

double q_from_omega(double omega, int m) {
  check_probability(omega, "omega");
  check_draws(m);
  if (omega == 1.0) return 1.0;
  return -std::expm1(static_cast<double>(m) * std::log1p(-omega));
}

double omega_from_q(double q, int m) {
  check_probability(q, "q");
  check_draws(m);
  if (q == 1.0) return 1.0;
  return -std::expm1(std::log1p(-q) / static_cast<double>(m));
}

SelectionProbs::SelectionProbs(std::vector<double> omega, int m) : omega_(std::move(omega)), m_(m) {
  check_draws(m);
  if (omega_.empty()) throw DomainError("SelectionProbs: empty omega");
  double total = 0.0;
  for (double w : omega_) {
    check_probability(w, "omega");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    std::ostringstream msg;
    msg << "SelectionProbs: omega sums to " << total << ", expected 1";
    throw DomainError(msg.str());
  }
  q_.resize(omega_.size());
  std::transform(omega_.begin(), omega_.end(), q_.begin(),
                 [m](double w) { return q_from_omega(w, m); });
}

SelectionProbs SelectionProbs::full_participation(std::size_t n) {
  if (n == 0) throw DomainError("SelectionProbs: no devices");
  SelectionProbs probs;
  probs.omega_.assign(n, 1.0 / static_cast<double>(n));
  probs.q_.assign(n, 1.0);
  probs.m_ = static_cast<int>(n);
  probs.full_ = true;
  return probs;
}

std::vector<std::size_t> ParticipantSet::selected() const {
  std::vector<std::size_t> out;
  for (std::size_t n = 0; n < indicator.size(); ++n) {
    if (indicator[n]) out.push_back(n);
  }
  return out;
}

std::size_t ParticipantSet::count() const {
  return static_cast<std::size_t>(std::count(indicator.begin(), indicator.end(), char{1}));
}

ParticipantSet draw_participants(const SelectionProbs& probs, Rng& rng) {
  const std::size_t n = probs.size();
  ParticipantSet set;
  set.indicator.assign(n, 0);
  if (probs.is_full_participation()) {
    std::fill(set.indicator.begin(), set.indicator.end(), char{1});
    set.draw_log.resize(n);
    std::iota(set.draw_log.begin(), set.draw_log.end(), std::size_t{0});
    return set;
  }

  std::vector<double> prefix(n);
  std::partial_sum(probs.omega().begin(), probs.omega().end(), prefix.begin());
  const double total = prefix.back();

  set.draw_log.reserve(static_cast<std::size_t>(probs.draws()));
  for (int draw = 0; draw < probs.draws(); ++draw) {
    const double u = rng.uniform() * total;
    // First index whose cumulative mass exceeds u; zero-mass devices are skipped.
    auto it = std::upper_bound(prefix.begin(), prefix.end(), u);
    std::size_t idx = static_cast<std::size_t>(it - prefix.begin());
    if (idx >= n) {
      // u landed in the rounding gap at the top; take the last device with mass.
      idx = n - 1;
      while (idx > 0 && probs.omega()[idx] == 0.0) --idx;
    }
    set.draw_log.push_back(idx);
    set.indicator[idx] = 1;
  }
  return set;
}

bool corollary2_lower_bound(long long n, long long m) {
  if (n < 1 || m < 1) throw DomainError("corollary2_lower_bound: need N >= 1 and m >= 1");
  const double nd = static_cast<double>(n);
  const double md = static_cast<double>(m);
  const double lhs = n == 1 ? 1.0 : -std::expm1(md * std::log1p(-1.0 / nd));
  const double rhs = static_cast<double>(std::min(n, m)) / nd * (1.0 - std::exp(-1.0));
  return lhs >= rhs;
}

}  // namespace fedsched
