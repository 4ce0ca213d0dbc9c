#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fedsched/config.hpp"

namespace fedsched::cli {

// Sectioned key = value text:
//
//   seed = 7
//   [schedule]
//   policy = "lyapunov"
//   p_max_db = 35
//
// Keys not listed in the file keep their defaults. Unknown sections or keys,
// duplicates, malformed values and invariant violations are all collected and
// reported together with their line numbers.
SimConfig parse_config_text(const std::string& text, const std::string& source = "<string>");
SimConfig parse_config(const std::filesystem::path& path);

// Canonical form: every key, fixed order, doubles with 17 significant digits.
// parse_config_text(write_config(c)) == c for every valid c.
std::string write_config(const SimConfig& config);

// Applies a single "section.key" override (as used by sweep grids). Throws
// ConfigError on an unknown key or malformed value.
void set_config_value(SimConfig& config, const std::string& dotted_key, const std::string& value);

// Every dotted key in canonical order.
std::vector<std::string> config_keys();

// A grid file: an ordinary config plus a [sweep] section whose entries are
// "section.key = [v1, v2, ...]". The sweep expands to the cartesian product,
// first key varying slowest.
struct GridSpec {
  SimConfig base;
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
};
GridSpec parse_grid_text(const std::string& text, const std::string& source = "<string>");
GridSpec parse_grid(const std::filesystem::path& path);

struct GridPoint {
  std::string label;  // "schedule.draws=5 time.tau_comp=2"
  SimConfig config;
};
std::vector<GridPoint> expand_grid(const GridSpec& grid);

}  // namespace fedsched::cli
