#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "fedsched/error.hpp"
#include "fedsched/numerics.hpp"
#include "fedsched/rng.hpp"
#include "oracles.hpp"

using namespace fedsched;

namespace {

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> z(n);
  for (int i = 0; i < n; ++i) z[i] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (n - 1));
  return z;
}

}  // namespace

TEST(LambertW, KnownValues) {
  EXPECT_EQ(lambert_w0(0.0), 0.0);
  EXPECT_NEAR(lambert_w0(std::exp(1.0)), 1.0, 1e-14);
  EXPECT_NEAR(lambert_w0(1.0), oracle::lambert_w0(1.0), 1e-14);
  EXPECT_NEAR(lambert_w0(1.0), 0.5671432904097838, 1e-15);
}

TEST(LambertW, RejectsOutsideDomain) {
  EXPECT_THROW(lambert_w0(-1e-3), DomainError);
  EXPECT_THROW(lambert_w0(std::nan("")), DomainError);
  EXPECT_THROW(lambert_w0(std::numeric_limits<double>::infinity()), DomainError);
}

TEST(LambertW, ResidualOnLogGrid) {
  for (double z : log_grid(1e-8, 1e8, 200)) {
    const double w = lambert_w0(z);
    EXPECT_LE(std::abs(w * std::exp(w) - z), 1e-10 * std::max(1.0, z)) << "z=" << z;
  }
}

TEST(LambertW, MatchesBisection) {
  for (double z : log_grid(1e-6, 1e6, 61)) {
    const double w = oracle::lambert_w0(z);
    EXPECT_NEAR(lambert_w0(z), w, 1e-12 * std::max(1.0, w)) << "z=" << z;
  }
}

TEST(LambertW, MonotoneOnGrid) {
  double prev = -1.0;
  for (double z : log_grid(1e-12, 1e12, 2000)) {
    const double w = lambert_w0(z);
    EXPECT_GE(w, prev);
    prev = w;
  }
}

TEST(Minimize1d, QuadraticVertex) {
  const auto m = minimize_1d([](double x) { return (x - 2.0) * (x - 2.0); }, 0.0, 10.0);
  EXPECT_NEAR(m.x, 2.0, 1e-6);
}

TEST(Minimize1d, MonotoneGoesToBoundary) {
  const auto m = minimize_1d([](double x) { return x; }, 3.0, 7.0);
  EXPECT_EQ(m.x, 3.0);
  EXPECT_EQ(m.fx, 3.0);
}

TEST(Minimize1d, BracketsConvexMinimizers) {
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const double c = -5.0 + 10.0 * rng.uniform();
    const double k = 0.1 + 10.0 * rng.uniform();
    ToleranceSpec tol;
    tol.abs_tol = 1e-9;
    tol.rel_tol = 1e-9;
    const auto m = minimize_1d([&](double x) { return k * (x - c) * (x - c) + 1.0; }, -6.0, 6.0, tol);
    EXPECT_NEAR(m.x, c, 1e-6);
  }
}

TEST(Minimize1d, NonFiniteThrows) {
  EXPECT_THROW(minimize_1d([](double x) { return x > 0.5 ? std::nan("") : x; }, 0.0, 1.0),
               NumericError);
}

TEST(Tolerance, Validation) {
  ToleranceSpec t;
  EXPECT_NO_THROW(t.validate());
  t.max_iters = 0;
  EXPECT_THROW(t.validate(), ConfigError);
}

TEST(Simplex, Examples) {
  auto p = project_to_simplex(std::vector<double>{0.2, 0.8});
  EXPECT_NEAR(p[0], 0.2, 1e-15);
  EXPECT_NEAR(p[1], 0.8, 1e-15);
  p = project_to_simplex(std::vector<double>{0.5, 0.5, 0.5});
  for (double v : p) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  p = project_to_simplex(std::vector<double>{1.0, 0.0, -1.0});
  EXPECT_NEAR(p[0], 1.0, 1e-15);
  EXPECT_NEAR(p[1], 0.0, 1e-15);
  EXPECT_NEAR(p[2], 0.0, 1e-15);
  EXPECT_THROW(project_to_simplex(std::vector<double>{}), DomainError);
}

TEST(Simplex, NearestPointInTwoDimensions) {
  // The projection onto {(w, 1 - w) : 0 <= w <= 1} is the closest grid point.
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const std::vector<double> v{4.0 * rng.uniform() - 2.0, 4.0 * rng.uniform() - 2.0};
    double best = 1e300, best_w = 0.0;
    for (int k = 0; k <= 100000; ++k) {
      const double w = k * 1e-5;
      const double d = (v[0] - w) * (v[0] - w) + (v[1] - 1.0 + w) * (v[1] - 1.0 + w);
      if (d < best) { best = d; best_w = w; }
    }
    const auto p = project_to_simplex(v);
    EXPECT_NEAR(p[0], best_w, 1e-5);
    EXPECT_NEAR(p[1], 1.0 - best_w, 1e-5);
  }
}

TEST(Simplex, RandomInputsLandOnSimplex) {
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> v(1 + rng.uniform_index(50));
    for (double& x : v) x = 10.0 * rng.normal();
    const auto p = project_to_simplex(v);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
    for (double x : p) EXPECT_GE(x, 0.0);
    const auto again = project_to_simplex(p);
    for (std::size_t k = 0; k < p.size(); ++k) EXPECT_NEAR(again[k], p[k], 1e-12);
  }
}

TEST(Simplex, FlooredProjection) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> v(2 + rng.uniform_index(20));
    for (double& x : v) x = rng.normal();
    const double floor = 0.5 / static_cast<double>(v.size()) * rng.uniform();
    const auto p = project_to_floored_simplex(v, floor);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
    for (double x : p) EXPECT_GE(x, floor - 1e-15);
  }
  EXPECT_THROW(project_to_floored_simplex(std::vector<double>{0.5, 0.5}, 0.6), DomainError);
}
