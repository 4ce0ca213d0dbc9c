#pragma once

#include <cstddef>
#include <vector>

#include "fedsched/rng.hpp"

namespace fedsched {

// Marginal participation probability after m categorical draws with
// per-draw probability omega: 1 - (1 - omega)^m.
double q_from_omega(double omega, int m);

// Inverse of q_from_omega: 1 - (1 - q)^(1/m).
double omega_from_q(double q, int m);

// Per-draw probabilities omega (on the simplex) for m draws, together with
// the implied marginals q.
class SelectionProbs {
 public:
  SelectionProbs() = default;
  // Validates sum(omega) == 1 within 1e-9 and omega in [0, 1].
  SelectionProbs(std::vector<double> omega, int m);
  // Bypasses the omega/q relation: every device participates with q = 1.
  static SelectionProbs full_participation(std::size_t n);

  const std::vector<double>& omega() const { return omega_; }
  const std::vector<double>& q() const { return q_; }
  int draws() const { return m_; }
  std::size_t size() const { return omega_.size(); }
  bool is_full_participation() const { return full_; }

 private:
  std::vector<double> omega_;
  std::vector<double> q_;
  int m_ = 1;
  bool full_ = false;
};

struct ParticipantSet {
  std::vector<char> indicator;             // 1 iff the device was drawn at least once
  std::vector<std::size_t> draw_log;       // raw draw outcomes, length m
  std::vector<std::size_t> selected() const;  // distinct drawn devices, ascending
  std::size_t count() const;
};

// m independent categorical draws by inverse CDF over the prefix sum of
// omega; repeated draws collapse to a single participation.
ParticipantSet draw_participants(const SelectionProbs& probs, Rng& rng);

// 1 - (1 - 1/N)^m >= (min(m, N) / N) (1 - 1/e)
bool corollary2_lower_bound(long long n, long long m);

}  // namespace fedsched
