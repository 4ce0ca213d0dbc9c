#pragma once

#include <functional>
#include <span>
#include <vector>

namespace fedsched {

struct ToleranceSpec {
  double abs_tol = 1e-12;
  double rel_tol = 1e-10;
  int max_iters = 200;

  // Throws ConfigError if any field is out of range.
  void validate() const;
};

// Principal branch W0 of the Lambert W function for z >= 0, i.e. the w >= 0
// solving w * exp(w) = z. Halley iteration (in log form for z > e) with a
// bisection fallback. Throws DomainError for negative or non-finite z.
double lambert_w0(double z, const ToleranceSpec& tol = {});

struct Minimum {
  double x;
  double fx;
};

// Golden-section search for a local minimizer of f on [lo, hi]. The returned
// point is the best evaluated abscissa, so monotone functions resolve to the
// boundary. Throws NumericError if f evaluates to a non-finite value.
Minimum minimize_1d(const std::function<double(double)>& f, double lo, double hi,
                    const ToleranceSpec& tol = {});

// Euclidean projection onto the probability simplex {w : sum(w) = 1, w >= 0}
// (sort-and-threshold algorithm of Held, Wolfe and Crowder).
std::vector<double> project_to_simplex(std::span<const double> v);

// Projection onto the shifted simplex {w : sum(w) = 1, w >= floor}. Requires
// floor * size(v) <= 1.
std::vector<double> project_to_floored_simplex(std::span<const double> v, double floor);

}  // namespace fedsched
