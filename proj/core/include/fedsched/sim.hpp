#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedsched/bound.hpp"
#include "fedsched/config.hpp"

namespace fedsched {

struct RoundRecord {
  std::size_t t = 0;
  std::vector<std::size_t> selected;  // distinct participants, ascending
  std::size_t draws = 0;              // raw categorical draws (m)
  double comm_time_total = 0.0;       // sum of selected devices' uplink times
  double comp_time = 0.0;
  double round_time = 0.0;
  double cum_time = 0.0;
  std::optional<double> train_loss;     // f(x_{t+1}), on evaluation rounds
  std::optional<double> test_accuracy;  // softmax task only

  // Per-device state for this round. queue is the backlog Z_n^t used for the decision.
  std::vector<double> gain;
  std::vector<double> omega;
  std::vector<double> q;
  std::vector<double> power;
  std::vector<double> queue;
  std::vector<double> realized_power;     // 1_n P_n
  std::vector<double> running_avg_power;  // (1/(t+1)) sum_{s<=t} P_n^s q_n^s

  double objective = 0.0;
  int solver_iters = 0;
  bool solver_converged = true;
};

struct EvalPoint {
  std::size_t t;
  double cum_time;
  double loss;
  std::optional<double> accuracy;
};

struct RunSummary {
  std::uint64_t seed = 0;
  Policy policy = Policy::lyapunov;
  std::size_t rounds = 0;  // completed rounds
  double gamma = 0.0;
  double initial_loss = 0.0;
  std::optional<double> initial_accuracy;
  std::optional<double> final_loss;
  std::optional<double> final_accuracy;
  double total_time = 0.0;
  double total_comm_time = 0.0;
  double mean_participants = 0.0;
  std::size_t solver_nonconverged = 0;
  std::vector<std::uint64_t> selection_counts;
  std::vector<double> final_running_avg_power;
  std::vector<double> final_queue;
  std::vector<EvalPoint> evals;  // includes t = 0 baseline at cum_time 0
  std::optional<double> time_to_target;
  std::optional<BoundReport> bound;  // quadratic task only
  double eps2_estimate = 0.0;        // quadratic: divergence at the optimum
};

// Thrown when a run aborts. Records already emitted to the sink stay valid;
// summary() covers the rounds completed before the failure.
class RunError : public std::runtime_error {
 public:
  RunError(const std::string& what, RunSummary partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const RunSummary& summary() const { return partial_; }

 private:
  RunSummary partial_;
};

using RecordSink = std::function<void(const RoundRecord&)>;

// Executes the FedAvg round loop for config.seed. Each round: draw channels,
// ask the policy for (omega, q, P), draw participants, train the distinct
// participants locally, aggregate with 1/q weights, advance the virtual
// queues (Lyapunov only), and emit a RoundRecord.
RunSummary run(const SimConfig& config, const RecordSink& sink);

struct RunResult {
  std::vector<RoundRecord> records;
  RunSummary summary;
};
RunResult run(const SimConfig& config);

// Step size the run will use (fixed or the corollary-1 schedule).
double resolve_step_size(const SimConfig& config, double smoothness);

// Minimum participation probability the policy guarantees.
double policy_q_min(const SimConfig& config);

// ---------------------------------------------------------------------------
// Post-processing

struct SeriesPoint {
  double time;
  double value;
};
using Series = std::vector<SeriesPoint>;

// (cum_time, metric) of every evaluated round.
Series metric_series(std::span<const RoundRecord> records, TargetMetric metric);
Series metric_series(std::span<const EvalPoint> evals, TargetMetric metric);

// First time at which the trailing mean of `window` consecutive series values
// reaches the target (<= for loss, >= for accuracy). nullopt if never.
std::optional<double> time_to_target(std::span<const SeriesPoint> series, double target,
                                     TargetMetric metric, std::size_t window = 1);
std::optional<double> time_to_target(std::span<const RoundRecord> records, double target,
                                     TargetMetric metric, std::size_t window = 1);

// Interpolates every run linearly onto a uniform grid over the time range all
// runs cover, averages pointwise, then applies a trailing moving average of
// `window` grid points. Throws DomainError when the runs do not overlap.
Series interpolate_and_average(std::span<const Series> runs, double grid_step, std::size_t window);

// ---------------------------------------------------------------------------
// Sweeps

struct SweepPoint {
  std::string label;
  SimConfig config;  // runs config.repeats seeds: seed, seed + 1, ...
};

struct SweepRow {
  std::string label;
  std::size_t runs_ok = 0;
  std::vector<std::optional<double>> time_to_target;  // one per seed
  double mean_time_to_target = 0.0;  // +inf if any seed failed or never reached the target
  double mean_final_loss = 0.0;
  double mean_final_accuracy = 0.0;
  double mean_participants = 0.0;
  double mean_total_time = 0.0;
  double selection_max_min_ratio = 0.0;  // over devices, pooled across seeds
  std::vector<double> selection_frequency;  // per device, pooled across seeds
  std::vector<std::string> errors;
};

// Runs every point (up to `jobs` runs concurrently). Failed runs are recorded
// in the row and do not stop the sweep. Row order follows `points`.
std::vector<SweepRow> sweep(std::span<const SweepPoint> points, std::size_t jobs = 1);

}  // namespace fedsched
