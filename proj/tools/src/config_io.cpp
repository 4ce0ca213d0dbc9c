#include "fedsched_cli/config_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <sstream>

#include "fedsched/error.hpp"

namespace fedsched::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + '"';
}

// Strips optional surrounding quotes. nullopt on a malformed quoted string.
std::optional<std::string> unquote(const std::string& raw) {
  if (raw.empty() || raw.front() != '"') return raw;
  if (raw.size() < 2 || raw.back() != '"') return std::nullopt;
  std::string out;
  for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
    if (raw[i] == '\\' && i + 2 < raw.size()) ++i;
    else if (raw[i] == '"') return std::nullopt;
    out += raw[i];
  }
  return out;
}

// Each parser returns an error description or nullopt on success.
using ParseResult = std::optional<std::string>;

ParseResult parse_value(const std::string& raw, std::uint64_t& out) {
  const char* end = raw.data() + raw.size();
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(raw.data(), end, v);
  if (raw.empty() || ec != std::errc() || ptr != end) {
    return "expected a non-negative integer, got '" + raw + "'";
  }
  out = v;
  return std::nullopt;
}

ParseResult parse_value(const std::string& raw, int& out) {
  const char* end = raw.data() + raw.size();
  int v = 0;
  auto [ptr, ec] = std::from_chars(raw.data(), end, v);
  if (raw.empty() || ec != std::errc() || ptr != end) {
    return "expected an integer, got '" + raw + "'";
  }
  out = v;
  return std::nullopt;
}

ParseResult parse_value(const std::string& raw, double& out) {
  const char* begin = raw.data();
  const char* end = raw.data() + raw.size();
  if (!raw.empty() && raw.front() == '+') ++begin;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (raw.empty() || ec != std::errc() || ptr != end || std::isnan(v)) {
    return "expected a number, got '" + raw + "'";
  }
  out = v;
  return std::nullopt;
}

ParseResult parse_value(const std::string& raw, std::optional<double>& out) {
  const auto text = unquote(raw);
  if (text && *text == "none") {
    out.reset();
    return std::nullopt;
  }
  double v = 0.0;
  if (parse_value(raw, v)) return "expected a number or \"none\", got '" + raw + "'";
  out = v;
  return std::nullopt;
}

ParseResult parse_value(const std::string& raw, bool& out) {
  if (raw == "true") out = true;
  else if (raw == "false") out = false;
  else return "expected true or false, got '" + raw + "'";
  return std::nullopt;
}

ParseResult parse_value(const std::string& raw, std::string& out) {
  const auto text = unquote(raw);
  if (!text) return "malformed string " + raw;
  out = *text;
  return std::nullopt;
}

template <class E>
ParseResult parse_enum(const std::string& raw, E& out,
                       std::initializer_list<std::pair<const char*, E>> names) {
  const auto text = unquote(raw);
  std::string allowed;
  for (const auto& [name, value] : names) {
    if (text && *text == name) {
      out = value;
      return std::nullopt;
    }
    allowed += allowed.empty() ? "" : ", ";
    allowed += name;
  }
  return "expected one of {" + allowed + "}, got " + raw;
}

ParseResult parse_value(const std::string& raw, Policy& out) {
  return parse_enum(raw, out, {{"lyapunov", Policy::lyapunov},
                               {"uniform", Policy::uniform},
                               {"full", Policy::full}});
}
ParseResult parse_value(const std::string& raw, TaskKind& out) {
  return parse_enum(raw, out, {{"softmax", TaskKind::softmax}, {"quadratic", TaskKind::quadratic}});
}
ParseResult parse_value(const std::string& raw, SigmaProfile& out) {
  return parse_enum(raw, out,
                    {{"linear", SigmaProfile::linear}, {"constant", SigmaProfile::constant}});
}
ParseResult parse_value(const std::string& raw, TargetMetric& out) {
  return parse_enum(raw, out, {{"loss", TargetMetric::loss}, {"accuracy", TargetMetric::accuracy}});
}
ParseResult parse_value(const std::string& raw, StepSizeMode& out) {
  return parse_enum(raw, out,
                    {{"fixed", StepSizeMode::fixed}, {"corollary1", StepSizeMode::corollary1}});
}

std::string format_value(std::uint64_t v) { return std::to_string(v); }
std::string format_value(int v) { return std::to_string(v); }
std::string format_value(double v) { return format_double(v); }
std::string format_value(bool v) { return v ? "true" : "false"; }
std::string format_value(const std::string& v) { return quote(v); }
std::string format_value(const std::optional<double>& v) {
  return v ? format_double(*v) : "\"none\"";
}
template <class E>
  requires std::is_enum_v<E>
std::string format_value(E v) {
  return quote(to_string(v));
}

struct Field {
  std::string section;  // empty for top-level keys
  std::string key;
  std::function<ParseResult(SimConfig&, const std::string&)> set;
  std::function<std::string(const SimConfig&)> get;

  std::string dotted() const { return section.empty() ? key : section + "." + key; }
};

template <class T>
Field top(const char* key, T SimConfig::*member) {
  return {"", key,
          [member](SimConfig& c, const std::string& raw) { return parse_value(raw, c.*member); },
          [member](const SimConfig& c) { return format_value(c.*member); }};
}

template <class S, class T>
Field sub(const char* section, const char* key, S SimConfig::*group, T S::*member) {
  return {section, key,
          [group, member](SimConfig& c, const std::string& raw) {
            return parse_value(raw, c.*group.*member);
          },
          [group, member](const SimConfig& c) { return format_value(c.*group.*member); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    using C = SimConfig;
    std::vector<Field> f;
    f.push_back(top("seed", &C::seed));
    f.push_back(top("repeats", &C::repeats));

    f.push_back(sub("task", "kind", &C::task, &TaskConfig::kind));
    f.push_back(sub("task", "dim", &C::task, &TaskConfig::dim));
    f.push_back(sub("task", "classes", &C::task, &TaskConfig::classes));
    f.push_back(sub("task", "samples_per_device", &C::task, &TaskConfig::samples_per_device));
    f.push_back(sub("task", "alpha", &C::task, &TaskConfig::alpha));
    f.push_back(sub("task", "class_separation", &C::task, &TaskConfig::class_separation));
    f.push_back(sub("task", "pool_per_class", &C::task, &TaskConfig::pool_per_class));
    f.push_back(sub("task", "test_per_class", &C::task, &TaskConfig::test_per_class));
    f.push_back(sub("task", "noise", &C::task, &TaskConfig::noise));
    f.push_back(sub("task", "center_spread", &C::task, &TaskConfig::center_spread));
    f.push_back(sub("task", "curvature_lo", &C::task, &TaskConfig::curvature_lo));
    f.push_back(sub("task", "curvature_hi", &C::task, &TaskConfig::curvature_hi));

    f.push_back(sub("network", "devices", &C::network, &NetworkConfig::devices));
    f.push_back(sub("network", "sigma_profile", &C::network, &NetworkConfig::sigma_profile));
    f.push_back(sub("network", "sigma_lo", &C::network, &NetworkConfig::sigma_lo));
    f.push_back(sub("network", "sigma_hi", &C::network, &NetworkConfig::sigma_hi));
    f.push_back(sub("network", "noise_power", &C::network, &NetworkConfig::noise_power));
    f.push_back(sub("network", "bandwidth", &C::network, &NetworkConfig::bandwidth));
    f.push_back(sub("network", "model_bits", &C::network, &NetworkConfig::model_bits));
    f.push_back(sub("network", "gain_floor", &C::network, &NetworkConfig::gain_floor));

    f.push_back(sub("schedule", "policy", &C::schedule, &ScheduleConfig::policy));
    f.push_back(sub("schedule", "draws", &C::schedule, &ScheduleConfig::draws));
    f.push_back(sub("schedule", "lambda", &C::schedule, &ScheduleConfig::lambda));
    f.push_back(sub("schedule", "v", &C::schedule, &ScheduleConfig::v));
    f.push_back(sub("schedule", "p_bar", &C::schedule, &ScheduleConfig::p_bar));
    f.push_back(sub("schedule", "p_max_db", &C::schedule, &ScheduleConfig::p_max_db));
    f.push_back(sub("schedule", "omega_floor_scale", &C::schedule,
                    &ScheduleConfig::omega_floor_scale));
    f.push_back(sub("schedule", "solver_max_iters", &C::schedule,
                    &ScheduleConfig::solver_max_iters));
    f.push_back(sub("schedule", "solver_rel_tol", &C::schedule, &ScheduleConfig::solver_rel_tol));
    f.push_back(sub("schedule", "solver_grad_tol", &C::schedule,
                    &ScheduleConfig::solver_grad_tol));

    f.push_back(sub("training", "step_size", &C::training, &TrainingConfig::step_size));
    f.push_back(sub("training", "gamma", &C::training, &TrainingConfig::gamma));
    f.push_back(sub("training", "local_steps", &C::training, &TrainingConfig::local_steps));
    f.push_back(sub("training", "batch_size", &C::training, &TrainingConfig::batch_size));
    f.push_back(sub("training", "rounds", &C::training, &TrainingConfig::rounds));
    f.push_back(sub("training", "eval_every", &C::training, &TrainingConfig::eval_every));

    f.push_back(sub("time", "tau_comp", &C::time, &TimeConfig::tau_comp));

    f.push_back(sub("output", "dir", &C::output, &OutputConfig::dir));
    f.push_back(sub("output", "grid_step", &C::output, &OutputConfig::grid_step));
    f.push_back(sub("output", "window", &C::output, &OutputConfig::window));
    f.push_back(sub("output", "target_metric", &C::output, &OutputConfig::target_metric));
    f.push_back(sub("output", "target", &C::output, &OutputConfig::target));
    f.push_back(sub("output", "target_window", &C::output, &OutputConfig::target_window));
    f.push_back(sub("output", "device_detail", &C::output, &OutputConfig::device_detail));
    return f;
  }();
  return table;
}

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields()) {
    if (f.section == section && f.key == key) return &f;
  }
  return nullptr;
}

bool known_section(const std::string& section) {
  for (const auto& f : fields()) {
    if (f.section == section) return true;
  }
  return false;
}

// Removes a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && quoted) ++i;
    else if (line[i] == '"') quoted = !quoted;
    else if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

struct Entry {
  std::size_t line;
  std::string section;
  std::string key;
  std::string value;
};

// Splits text into entries; malformed lines are appended to `errors`.
std::vector<Entry> tokenize(const std::string& text, const std::string& source,
                            std::vector<std::string>& errors) {
  std::vector<Entry> entries;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t number = 0;
  auto error = [&](const std::string& what) {
    errors.push_back(source + ":" + std::to_string(number) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++number;
    const std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') {
        error("malformed section header '" + body + "'");
        continue;
      }
      section = trim(body.substr(1, body.size() - 2));
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      error("expected 'key = value', got '" + body + "'");
      continue;
    }
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty()) {
      error("missing key before '='");
      continue;
    }
    if (value.empty()) {
      error("missing value for '" + key + "'");
      continue;
    }
    entries.push_back({number, section, key, value});
  }
  return entries;
}

[[noreturn]] void raise(const std::vector<std::string>& errors) {
  std::string msg = "configuration errors:";
  for (const auto& e : errors) msg += "\n  " + e;
  throw ConfigError(msg);
}

SimConfig apply_entries(const std::vector<Entry>& entries, const std::string& source,
                        std::vector<std::string>& errors) {
  SimConfig config;
  std::map<std::string, std::size_t> seen;
  std::set<std::string> malformed;
  for (const auto& e : entries) {
    const std::string where = source + ":" + std::to_string(e.line) + ": ";
    const std::string dotted = e.section.empty() ? e.key : e.section + "." + e.key;
    if (!e.section.empty() && !known_section(e.section)) {
      errors.push_back(where + "unknown section [" + e.section + "]");
      continue;
    }
    const Field* field = find_field(e.section, e.key);
    if (!field) {
      errors.push_back(where + "unknown key '" + dotted + "'");
      continue;
    }
    if (auto [it, fresh] = seen.emplace(dotted, e.line); !fresh) {
      errors.push_back(where + "duplicate key '" + dotted + "' (first set on line " +
                       std::to_string(it->second) + ")");
      continue;
    }
    if (auto problem = field->set(config, e.value)) {
      errors.push_back(where + dotted + ": " + *problem);
      malformed.insert(dotted);
    }
  }

  // Invariants are still checked so one pass reports everything; a key whose
  // value failed to parse is not reported twice.
  for (const auto& p : config.problems()) {
    if (malformed.count(p.key)) continue;
    auto it = seen.find(p.key);
    const std::string where =
        it == seen.end() ? source + ": " : source + ":" + std::to_string(it->second) + ": ";
    errors.push_back(where + p.key + ": " + p.message + (it == seen.end() ? " (default)" : ""));
  }
  return config;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> split_list(const std::string& raw, bool& ok) {
  ok = raw.size() >= 2 && raw.front() == '[' && raw.back() == ']';
  std::vector<std::string> items;
  if (!ok) return items;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
    const char c = raw[i];
    if (c == '"') quoted = !quoted;
    if (c == ',' && !quoted) {
      items.push_back(trim(current));
      current.clear();
    } else {
      current += c;
    }
  }
  if (!trim(current).empty() || !items.empty()) items.push_back(trim(current));
  for (const auto& item : items) ok = ok && !item.empty();
  ok = ok && !items.empty();
  return items;
}

}  // namespace

SimConfig parse_config_text(const std::string& text, const std::string& source) {
  std::vector<std::string> errors;
  const auto entries = tokenize(text, source, errors);
  SimConfig config = apply_entries(entries, source, errors);
  if (!errors.empty()) raise(errors);
  return config;
}

SimConfig parse_config(const std::filesystem::path& path) {
  return parse_config_text(read_file(path), path.string());
}

std::string write_config(const SimConfig& config) {
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      section = f.section;
      out << "\n[" << section << "]\n";
    }
    out << f.key << " = " << f.get(config) << "\n";
  }
  return out.str();
}

void set_config_value(SimConfig& config, const std::string& dotted_key, const std::string& value) {
  const auto dot = dotted_key.find('.');
  const std::string section = dot == std::string::npos ? "" : dotted_key.substr(0, dot);
  const std::string key = dot == std::string::npos ? dotted_key : dotted_key.substr(dot + 1);
  const Field* field = find_field(section, key);
  if (!field) throw ConfigError("unknown key '" + dotted_key + "'");
  if (auto problem = field->set(config, value)) throw ConfigError(dotted_key + ": " + *problem);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.dotted());
  return keys;
}

GridSpec parse_grid_text(const std::string& text, const std::string& source) {
  std::vector<std::string> errors;
  auto entries = tokenize(text, source, errors);
  std::vector<Entry> config_entries;
  GridSpec grid;
  std::set<std::string> axis_keys;
  for (auto& e : entries) {
    if (e.section != "sweep") {
      config_entries.push_back(std::move(e));
      continue;
    }
    const std::string where = source + ":" + std::to_string(e.line) + ": ";
    bool ok = false;
    auto values = split_list(e.value, ok);
    if (!ok) {
      errors.push_back(where + "sweep." + e.key + ": expected a non-empty list [v1, v2, ...]");
      continue;
    }
    if (!axis_keys.insert(e.key).second) {
      errors.push_back(where + "duplicate sweep axis '" + e.key + "'");
      continue;
    }
    SimConfig probe;
    for (const auto& v : values) {
      try {
        set_config_value(probe, e.key, v);
      } catch (const ConfigError& err) {
        errors.push_back(where + "sweep: " + err.what());
        break;
      }
    }
    grid.axes.emplace_back(e.key, std::move(values));
  }
  grid.base = apply_entries(config_entries, source, errors);
  if (!errors.empty()) raise(errors);
  return grid;
}

GridSpec parse_grid(const std::filesystem::path& path) {
  return parse_grid_text(read_file(path), path.string());
}

std::vector<GridPoint> expand_grid(const GridSpec& grid) {
  std::vector<GridPoint> points{{"", grid.base}};
  for (const auto& [key, values] : grid.axes) {
    std::vector<GridPoint> next;
    for (const auto& p : points) {
      for (const auto& v : values) {
        GridPoint q = p;
        set_config_value(q.config, key, v);
        q.label += (q.label.empty() ? "" : " ") + key + "=" + v;
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  if (points.size() == 1 && points[0].label.empty()) points[0].label = "base";
  for (const auto& p : points) {
    try {
      p.config.validate();
    } catch (const ConfigError& e) {
      throw ConfigError("grid point " + p.label + ": " + e.what());
    }
  }
  return points;
}

}  // namespace fedsched::cli
