#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fedsched/sim.hpp"

namespace fedsched::cli {

// Per-round CSV schema. The first line of every rounds file is this comment.
inline constexpr const char* kRoundsSchema = "# fedsched-rounds v1";
inline constexpr const char* kDevicesSchema = "# fedsched-devices v1";

void write_rounds_header(std::ostream& out);
void write_round_row(std::ostream& out, const RoundRecord& r);
void write_device_header(std::ostream& out);
void write_device_rows(std::ostream& out, const RoundRecord& r);

// Loads (cum_time, metric) pairs from a rounds CSV written by cmd_run.
Series read_rounds_series(const std::filesystem::path& path, TargetMetric metric);

struct RunOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;       // --seed, beats FEDSCHED_SEED
  std::optional<std::filesystem::path> out;  // --out, beats output.dir
};

struct SweepOptions {
  std::filesystem::path grid;
  std::size_t jobs = 1;
  std::optional<std::filesystem::path> out;
};

struct AnalyzeOptions {
  std::string inputs;  // glob pattern
  double grid_step = 1.0;
  std::size_t window = 20;
  std::optional<double> target;
  TargetMetric metric = TargetMetric::loss;
  std::filesystem::path out = "analysis.csv";
};

// Each returns the process exit code; diagnostics go to `err`.
int cmd_run(const RunOptions& options, std::ostream& log, std::ostream& err);
int cmd_sweep(const SweepOptions& options, std::ostream& log, std::ostream& err);
int cmd_analyze(const AnalyzeOptions& options, std::ostream& log, std::ostream& err);

}  // namespace fedsched::cli
