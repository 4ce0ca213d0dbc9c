#include "fedsched_cli/commands.hpp"

#include <glob.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "fedsched/error.hpp"
#include "fedsched_cli/config_io.hpp"

namespace fedsched::cli {

namespace {

using nlohmann::json;

constexpr double kConstraintTolerance = 0.05;

enum Exit { kOk = 0, kRunFailed = 1, kBadInput = 2, kIoError = 3 };

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string opt(const std::optional<double>& v) { return v ? num(*v) : ""; }

class IoError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json summary_json(const SimConfig& config, const RunSummary& s, const std::string& status,
                  const std::string& error) {
  json j;
  j["status"] = status;
  if (!error.empty()) j["error"] = error;
  j["seed"] = s.seed;
  j["policy"] = to_string(s.policy);
  j["rounds_completed"] = s.rounds;
  j["gamma"] = s.gamma;
  j["initial_loss"] = s.initial_loss;
  j["initial_accuracy"] = optional_json(s.initial_accuracy);
  j["final_loss"] = optional_json(s.final_loss);
  j["final_accuracy"] = optional_json(s.final_accuracy);
  j["total_time"] = s.total_time;
  j["total_comm_time"] = s.total_comm_time;
  j["mean_participants"] = s.mean_participants;
  j["solver_nonconverged_rounds"] = s.solver_nonconverged;
  j["target"] = optional_json(config.output.target);
  j["target_metric"] = to_string(config.output.target_metric);
  j["time_to_target"] = optional_json(s.time_to_target);

  const auto sigma = config.channel_params().sigma;
  const double p_bar = config.schedule.p_bar;
  json devices = json::array();
  std::size_t violated = 0;
  for (std::size_t n = 0; n < s.selection_counts.size(); ++n) {
    const double avg = n < s.final_running_avg_power.size() ? s.final_running_avg_power[n] : 0.0;
    const bool ok = avg <= p_bar * (1.0 + kConstraintTolerance);
    violated += ok ? 0 : 1;
    devices.push_back({{"device", n},
                       {"sigma", sigma[n]},
                       {"selection_count", s.selection_counts[n]},
                       {"running_avg_power", avg},
                       {"final_queue", n < s.final_queue.size() ? s.final_queue[n] : 0.0},
                       {"constraint_satisfied", ok}});
  }
  j["power_constraint"] = {{"p_bar", p_bar},
                           {"tolerance", kConstraintTolerance},
                           {"devices_violating", violated}};
  j["devices"] = std::move(devices);

  json evals = json::array();
  for (const auto& e : s.evals) {
    evals.push_back({{"t", e.t},
                     {"cum_time", e.cum_time},
                     {"loss", e.loss},
                     {"accuracy", optional_json(e.accuracy)}});
  }
  j["evaluations"] = std::move(evals);

  if (s.bound) {
    j["bound"] = {{"c", s.bound->c},
                  {"phi1", s.bound->phi1},
                  {"phi2", s.bound->phi2},
                  {"mean_participation", s.bound->mean_participation},
                  {"optimization_term", s.bound->optimization_term},
                  {"rhs", s.bound->rhs},
                  {"step_size_ok", s.bound->step_size_ok},
                  {"eps2", s.eps2_estimate}};
  }
  j["config"] = write_config(config);
  return j;
}

std::optional<std::uint64_t> env_seed(std::ostream& err, bool& bad) {
  bad = false;
  const char* raw = std::getenv("FEDSCHED_SEED");
  if (!raw || !*raw) return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(raw, &end, 10);
  if (errno != 0 || *end != '\0' || raw[0] == '-') {
    err << "error: FEDSCHED_SEED must be a non-negative integer, got '" << raw << "'\n";
    bad = true;
    return std::nullopt;
  }
  return static_cast<std::uint64_t>(v);
}

// Runs one seed into `dir`. Returns false if the run aborted.
bool run_one(const SimConfig& config, const std::filesystem::path& dir, std::ostream& log,
             std::ostream& err) {
  ensure_dir(dir);
  auto rounds = open_out(dir / "rounds.csv");
  write_rounds_header(rounds);
  std::optional<std::ofstream> devices;
  if (config.output.device_detail) {
    devices = open_out(dir / "devices.csv");
    write_device_header(*devices);
  }
  auto sink = [&](const RoundRecord& r) {
    write_round_row(rounds, r);
    if (devices) write_device_rows(*devices, r);
  };

  RunSummary summary;
  std::string status = "ok";
  std::string error;
  try {
    summary = run(config, sink);
  } catch (const RunError& e) {
    summary = e.summary();
    status = "failed";
    error = e.what();
  }
  rounds.flush();
  if (!rounds) throw IoError("write failed for " + (dir / "rounds.csv").string());

  auto js = open_out(dir / "summary.json");
  js << summary_json(config, summary, status, error).dump(2) << "\n";
  if (!js) throw IoError("write failed for " + (dir / "summary.json").string());

  if (status != "ok") {
    err << "error: seed " << config.seed << ": " << error << " (partial results in "
        << dir.string() << ")\n";
    return false;
  }
  log << "seed " << config.seed << ": " << summary.rounds << " rounds, "
      << "simulated time " << num(summary.total_time) << " s";
  if (summary.final_loss) log << ", final loss " << num(*summary.final_loss);
  if (summary.final_accuracy) log << ", accuracy " << num(*summary.final_accuracy);
  if (config.output.target) {
    log << ", time to target " << (summary.time_to_target ? num(*summary.time_to_target) : "never");
  }
  log << "\n";
  return true;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

void write_rounds_header(std::ostream& out) {
  out << kRoundsSchema << "\n"
      << "t,num_selected,draws,comm_time_total,comp_time,round_time,cum_time,train_loss,"
         "test_accuracy,objective,solver_iters,solver_converged,mean_queue,max_running_avg_power,"
         "selected\n";
}

void write_round_row(std::ostream& out, const RoundRecord& r) {
  double queue_total = 0.0;
  for (double z : r.queue) queue_total += z;
  const double mean_queue = r.queue.empty() ? 0.0 : queue_total / static_cast<double>(r.queue.size());
  const double max_avg = r.running_avg_power.empty()
                             ? 0.0
                             : *std::max_element(r.running_avg_power.begin(),
                                                 r.running_avg_power.end());
  out << r.t << ',' << r.selected.size() << ',' << r.draws << ',' << num(r.comm_time_total) << ','
      << num(r.comp_time) << ',' << num(r.round_time) << ',' << num(r.cum_time) << ','
      << opt(r.train_loss) << ',' << opt(r.test_accuracy) << ',' << num(r.objective) << ','
      << r.solver_iters << ',' << (r.solver_converged ? 1 : 0) << ',' << num(mean_queue) << ','
      << num(max_avg) << ',';
  for (std::size_t i = 0; i < r.selected.size(); ++i) out << (i ? ";" : "") << r.selected[i];
  out << '\n';
}

void write_device_header(std::ostream& out) {
  out << kDevicesSchema << "\n"
      << "t,device,gain,omega,q,power,queue,realized_power,running_avg_power\n";
}

void write_device_rows(std::ostream& out, const RoundRecord& r) {
  for (std::size_t n = 0; n < r.gain.size(); ++n) {
    out << r.t << ',' << n << ',' << num(r.gain[n]) << ',' << num(r.omega[n]) << ','
        << num(r.q[n]) << ',' << num(r.power[n]) << ',' << num(r.queue[n]) << ','
        << num(r.realized_power[n]) << ',' << num(r.running_avg_power[n]) << '\n';
  }
}

Series read_rounds_series(const std::filesystem::path& path, TargetMetric metric) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kRoundsSchema) {
    throw ConfigError(path.string() + ": missing '" + kRoundsSchema + "' schema line");
  }
  if (!std::getline(in, line)) throw ConfigError(path.string() + ": missing header");
  const auto header = split_csv_line(line);
  const std::string wanted = metric == TargetMetric::loss ? "train_loss" : "test_accuracy";
  const auto time_it = std::find(header.begin(), header.end(), "cum_time");
  const auto value_it = std::find(header.begin(), header.end(), wanted);
  if (time_it == header.end() || value_it == header.end()) {
    throw ConfigError(path.string() + ": header lacks cum_time or " + wanted);
  }
  const auto time_col = static_cast<std::size_t>(time_it - header.begin());
  const auto value_col = static_cast<std::size_t>(value_it - header.begin());

  Series series;
  std::size_t number = 2;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ConfigError(path.string() + ":" + std::to_string(number) + ": expected " +
                        std::to_string(header.size()) + " columns");
    }
    if (cells[value_col].empty()) continue;
    series.push_back({std::stod(cells[time_col]), std::stod(cells[value_col])});
  }
  return series;
}

int cmd_run(const RunOptions& options, std::ostream& log, std::ostream& err) {
  try {
    SimConfig config = parse_config(options.config);
    bool bad_env = false;
    const auto from_env = env_seed(err, bad_env);
    if (bad_env) return kBadInput;
    if (options.seed) config.seed = *options.seed;
    else if (from_env) config.seed = *from_env;
    if (options.out) config.output.dir = options.out->string();

    const std::filesystem::path root = config.output.dir;
    bool ok = true;
    for (std::size_t r = 0; r < config.repeats; ++r) {
      SimConfig single = config;
      single.seed = config.seed + r;
      single.repeats = 1;
      const auto dir = config.repeats == 1 ? root : root / ("seed-" + std::to_string(single.seed));
      ok = run_one(single, dir, log, err) && ok;
    }
    return ok ? kOk : kRunFailed;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  }
}

int cmd_sweep(const SweepOptions& options, std::ostream& log, std::ostream& err) {
  try {
    const GridSpec grid = parse_grid(options.grid);
    const auto points = expand_grid(grid);
    std::vector<SweepPoint> sweep_points;
    for (const auto& p : points) sweep_points.push_back({p.label, p.config});

    const std::filesystem::path dir = options.out.value_or(std::filesystem::path(grid.base.output.dir));
    ensure_dir(dir);
    log << "sweep: " << points.size() << " configurations x " << grid.base.repeats
        << " seeds, " << options.jobs << " job(s)\n";
    const auto rows = sweep(sweep_points, std::max<std::size_t>(options.jobs, 1));

    auto csv = open_out(dir / "sweep.csv");
    csv << "# fedsched-sweep v1\n"
        << "label,runs_ok,mean_time_to_target,time_to_target_per_seed,mean_final_loss,"
           "mean_final_accuracy,mean_participants,mean_total_time,selection_max_min_ratio,"
           "errors\n";
    bool all_ok = true;
    for (const auto& row : rows) {
      csv << '"' << row.label << "\"," << row.runs_ok << ',' << num(row.mean_time_to_target)
          << ',';
      for (std::size_t i = 0; i < row.time_to_target.size(); ++i) {
        csv << (i ? ";" : "") << (row.time_to_target[i] ? num(*row.time_to_target[i]) : "none");
      }
      csv << ',' << num(row.mean_final_loss) << ',' << num(row.mean_final_accuracy) << ','
          << num(row.mean_participants) << ',' << num(row.mean_total_time) << ','
          << num(row.selection_max_min_ratio) << ',' << row.errors.size() << '\n';

      log << row.label << ": time to target " << num(row.mean_time_to_target) << " s, "
          << row.runs_ok << " run(s) ok\n";
      for (const auto& e : row.errors) err << "error: " << row.label << ": " << e << "\n";
      all_ok = all_ok && row.errors.empty();
    }
    if (!csv.flush()) throw IoError("write failed for " + (dir / "sweep.csv").string());
    return all_ok ? kOk : kRunFailed;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  }
}

int cmd_analyze(const AnalyzeOptions& options, std::ostream& log, std::ostream& err) {
  glob_t matches{};
  const int rc = ::glob(options.inputs.c_str(), 0, nullptr, &matches);
  std::vector<std::filesystem::path> files;
  if (rc == 0) {
    for (std::size_t i = 0; i < matches.gl_pathc; ++i) files.emplace_back(matches.gl_pathv[i]);
  }
  globfree(&matches);
  if (files.empty()) {
    err << "error: no files match '" << options.inputs << "'\n";
    return kBadInput;
  }

  try {
    std::vector<Series> runs;
    for (const auto& f : files) {
      runs.push_back(read_rounds_series(f, options.metric));
      if (runs.back().empty()) throw ConfigError(f.string() + ": no evaluated rounds");
      if (options.target) {
        const auto hit = time_to_target(runs.back(), *options.target, options.metric);
        log << f.string() << ": time to target " << (hit ? num(*hit) : "never") << "\n";
      }
    }
    const Series averaged = interpolate_and_average(runs, options.grid_step, options.window);

    auto out = open_out(options.out);
    out << "# fedsched-analysis v1\n"
        << "time," << to_string(options.metric) << "\n";
    for (const auto& p : averaged) out << num(p.time) << ',' << num(p.value) << '\n';
    if (!out.flush()) throw IoError("write failed for " + options.out.string());

    log << "averaged " << runs.size() << " run(s) onto " << averaged.size() << " grid points -> "
        << options.out.string() << "\n";
    if (options.target) {
      const auto hit = time_to_target(averaged, *options.target, options.metric);
      log << "averaged series: time to target " << (hit ? num(*hit) : "never") << "\n";
    }
    return kOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::invalid_argument& e) {
    err << "error: malformed number in input: " << e.what() << "\n";
    return kBadInput;
  }
}

}  // namespace fedsched::cli
