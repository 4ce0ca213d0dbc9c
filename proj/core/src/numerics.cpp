#include "fedsched/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "fedsched/error.hpp"

namespace fedsched {

void ToleranceSpec::validate() const {
  if (!(abs_tol > 0.0) || !(rel_tol > 0.0) || max_iters < 1) {
    std::ostringstream msg;
    msg << "invalid tolerance: abs_tol=" << abs_tol << " rel_tol=" << rel_tol
        << " max_iters=" << max_iters;
    throw ConfigError(msg.str());
  }
}

namespace {

double w0_residual(double w, double z) { return std::abs(w * std::exp(w) - z); }

double w0_initial_guess(double z) {
  if (z <= std::numbers::e) {
    // Winitzki's approximation, accurate to a few percent on [0, e].
    const double l = std::log1p(z);
    return l * (1.0 - std::log1p(l) / (2.0 + l));
  }
  const double l1 = std::log(z);
  const double l2 = std::log(l1);
  return l1 - l2 + l2 / l1;
}

// Solves w * exp(w) = z on [lo, hi] by bisection on the monotone
// w + log(w) - log(z) (or w * exp(w) - z near zero).
double w0_bisect(double z, double lo, double hi, int max_iters) {
  const double log_z = std::log(z);
  auto sign = [&](double w) {
    if (w <= 0.0) return -1.0;
    return (w + std::log(w) - log_z);
  };
  for (int i = 0; i < std::max(max_iters, 200) && hi - lo > 0.0; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (sign(mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double lambert_w0(double z, const ToleranceSpec& tol) {
  tol.validate();
  if (!std::isfinite(z) || z < 0.0) {
    std::ostringstream msg;
    msg << "lambert_w0: argument must be finite and >= 0, got " << z;
    throw DomainError(msg.str());
  }
  if (z == 0.0) return 0.0;

  const double accept = std::max(tol.abs_tol, tol.rel_tol * z);
  const bool log_form = z > std::numbers::e;
  const double log_z = std::log(z);
  double w = w0_initial_guess(z);

  for (int i = 0; i < tol.max_iters; ++i) {
    double step;
    if (log_form) {
      // g(w) = w + log(w) - log(z), g' = 1 + 1/w, g'' = -1/w^2.
      const double g = w + std::log(w) - log_z;
      const double g1 = 1.0 + 1.0 / w;
      const double g2 = -1.0 / (w * w);
      step = 2.0 * g * g1 / (2.0 * g1 * g1 - g * g2);
    } else {
      const double ew = std::exp(w);
      const double f = w * ew - z;
      const double f1 = ew * (w + 1.0);
      step = f / (f1 - (w + 2.0) * f / (2.0 * w + 2.0));
    }
    const double next = w - step;
    if (!std::isfinite(next) || next <= 0.0) break;
    w = next;
    if (std::abs(step) <= 4.0 * std::numeric_limits<double>::epsilon() * w) break;
  }

  if (std::isfinite(w) && w > 0.0 && w0_residual(w, z) <= accept) return w;

  const double hi = log_form ? log_z : 1.0;
  w = w0_bisect(z, 0.0, hi, tol.max_iters);
  if (w0_residual(w, z) > accept) {
    std::ostringstream msg;
    msg << "lambert_w0: failed to converge for z=" << z << " (w=" << w << ")";
    throw NumericError(msg.str());
  }
  return w;
}

Minimum minimize_1d(const std::function<double(double)>& f, double lo, double hi,
                    const ToleranceSpec& tol) {
  tol.validate();
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    std::ostringstream msg;
    msg << "minimize_1d: need finite lo < hi, got [" << lo << ", " << hi << "]";
    throw DomainError(msg.str());
  }
  auto eval = [&](double x) {
    const double y = f(x);
    if (!std::isfinite(y)) {
      std::ostringstream msg;
      msg << "minimize_1d: objective is non-finite at x=" << x;
      throw NumericError(msg.str());
    }
    return y;
  };

  Minimum best{lo, eval(lo)};
  auto consider = [&](double x, double y) {
    if (y < best.fx) best = {x, y};
  };
  consider(hi, eval(hi));

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = eval(c);
  double fd = eval(d);
  consider(c, fc);
  consider(d, fd);

  for (int i = 0; i < tol.max_iters; ++i) {
    if (b - a <= tol.abs_tol + tol.rel_tol * 0.5 * (std::abs(c) + std::abs(d))) break;
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = eval(c);
      consider(c, fc);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = eval(d);
      consider(d, fd);
    }
  }
  return best;
}

std::vector<double> project_to_simplex(std::span<const double> v) {
  if (v.empty()) throw DomainError("project_to_simplex: empty vector");
  for (double x : v) {
    if (!std::isfinite(x)) throw DomainError("project_to_simplex: non-finite entry");
  }
  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());

  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    cumsum += sorted[j];
    const double candidate = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0.0) theta = candidate;
  }

  std::vector<double> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(),
                 [theta](double x) { return std::max(x - theta, 0.0); });
  return out;
}

std::vector<double> project_to_floored_simplex(std::span<const double> v, double floor) {
  if (v.empty()) throw DomainError("project_to_floored_simplex: empty vector");
  const double mass = 1.0 - floor * static_cast<double>(v.size());
  if (floor < 0.0 || mass < 0.0) {
    throw DomainError("project_to_floored_simplex: floor * size exceeds 1");
  }
  if (mass == 0.0) return std::vector<double>(v.size(), floor);

  std::vector<double> shifted(v.size());
  std::transform(v.begin(), v.end(), shifted.begin(),
                 [&](double x) { return (x - floor) / mass; });
  std::vector<double> p = project_to_simplex(shifted);
  for (double& x : p) x = floor + mass * x;
  return p;
}

}  // namespace fedsched
