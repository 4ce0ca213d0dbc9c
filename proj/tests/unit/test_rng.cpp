#include <gtest/gtest.h>

#include <cmath>
#include <string>
#include <unordered_set>
#include <vector>

#include "fedsched/error.hpp"
#include "fedsched/rng.hpp"

using namespace fedsched;

TEST(Rng, SameSeedAndLabelRepeat) {
  Rng a = Rng::from_label(42, "channel");
  Rng b = Rng::from_label(42, "channel");
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
}

TEST(Rng, LabelsGiveDifferentStreams) {
  Rng a = Rng::from_label(42, "channel");
  Rng b = Rng::from_label(42, "sampling");
  int equal = 0;
  for (int i = 0; i < 100; ++i) equal += a() == b();
  EXPECT_EQ(equal, 0);
}

TEST(Rng, SeedsGiveDifferentStreams) {
  // Overlap of the first 1000 draws bucketed into 2^16 cells. Independent
  // streams share about 1000 * 1000 / 65536 ~ 15 cells.
  Rng a = Rng::from_label(42, "channel");
  Rng b = Rng::from_label(43, "channel");
  std::unordered_set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) seen.insert(a() >> 48);
  int shared = 0;
  for (int i = 0; i < 1000; ++i) shared += seen.count(b() >> 48) ? 1 : 0;
  EXPECT_LT(shared, 50);
}

TEST(Rng, KnownHashes) {
  // FNV-1a offset basis for the empty string, and the published first
  // SplitMix64 output for state 0.
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(splitmix64(0), 0xe220a8397b1dcdafULL);
}

TEST(Rng, ForkDoesNotAdvanceParent) {
  Rng a(9), b(9);
  Rng child = a.fork(3);
  EXPECT_EQ(a(), b());
  Rng child2 = b.fork(3);
  EXPECT_EQ(child(), child2());
  EXPECT_NE(a.fork(4)(), a.fork(5)());
}

TEST(Rng, StreamsRejectDuplicates) {
  const std::vector<std::string> labels{"channel", "sampling", "channel"};
  EXPECT_THROW(rng_streams(1, labels), ConfigError);
  const std::vector<std::string> ok{"channel", "sampling"};
  auto streams = rng_streams(1, ok);
  ASSERT_EQ(streams.size(), 2u);
  Rng ref = Rng::from_label(1, "sampling");
  EXPECT_EQ(streams[1](), ref());
}

TEST(Rng, UniformMoments) {
  Rng rng(1);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    s += u;
    s2 += u * u;
  }
  EXPECT_NEAR(s / n, 0.5, 0.005);
  EXPECT_NEAR(s2 / n - (s / n) * (s / n), 1.0 / 12.0, 0.002);
}

TEST(Rng, UniformIndexCoversRange) {
  Rng rng(2);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.uniform_index(7)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
  EXPECT_EQ(rng.uniform_index(1), 0u);
}

TEST(Rng, NormalAndExponentialMoments) {
  Rng rng(4);
  const int n = 200000;
  double s = 0.0, s2 = 0.0, e = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
    e += rng.exponential(3.0);
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
  EXPECT_NEAR(e / n, 3.0, 0.05);
}

TEST(Rng, GammaMean) {
  Rng rng(8);
  for (double shape : {0.01, 0.5, 1.0, 4.0}) {
    double s = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) s += std::exp(rng.log_gamma_variate(shape));
    EXPECT_NEAR(s / n, shape, 0.03 * std::max(shape, 0.3)) << shape;
  }
}
