#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "fedsched/channel.hpp"
#include "fedsched/fedavg.hpp"
#include "fedsched/numerics.hpp"
#include "fedsched/rng.hpp"
#include "fedsched/scheduler.hpp"
#include "fedsched/task.hpp"

using namespace fedsched;

static void BM_LambertW0(benchmark::State& state) {
  std::vector<double> z(1024);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = std::exp(-18.0 + 36.0 * i / z.size());
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(lambert_w0(z[i++ & 1023]));
  }
}
BENCHMARK(BM_LambertW0);

static void BM_OptimalPower(benchmark::State& state) {
  ChannelParams ch;
  ch.sigma = {1.0};
  const LyapunovParams lp;
  double z = 0.5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(optimal_power(2.0, z, lp, ch));
    z = z < 100.0 ? z * 1.01 : 0.5;
  }
}
BENCHMARK(BM_OptimalPower);

// One scheduler round on the paper network: N devices, m = 10, lambda = 100.
static void BM_DecideRound(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  ChannelParams ch;
  ch.sigma = linear_sigma_profile(n, 0.1, 10.0);
  Rng rng(1);
  std::vector<ChannelState> states;
  for (int t = 0; t < 64; ++t) states.push_back(draw_channel(ch, rng, t));
  VirtualQueues z(n);
  for (double& q : z.z) q = 5.0 * rng.uniform();
  const LyapunovParams lp;
  std::size_t t = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(decide_round(states[t++ & 63], z, lp, ch, 10));
  }
}
BENCHMARK(BM_DecideRound)->Arg(10)->Arg(100)->Arg(1000);

static void BM_SolveSelection(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  std::vector<double> a(n, 1.0), b(n);
  for (double& x : b) x = std::exp(8.0 * rng.uniform());
  const std::vector<double> init(n, 1.0 / static_cast<double>(n));
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_selection(a, b, 10, init));
  }
}
BENCHMARK(BM_SolveSelection)->Arg(100);

static void BM_LocalSgdSoftmax(benchmark::State& state) {
  TaskSpec spec;
  spec.num_devices = 10;
  Rng rng(3);
  const auto task = SoftmaxTask::generate(spec, rng);
  const auto x = task.initial_params();
  for (auto _ : state) {
    benchmark::DoNotOptimize(local_sgd(x, 0, task, 0.01, 10, rng));
  }
}
BENCHMARK(BM_LocalSgdSoftmax);

BENCHMARK_MAIN();
