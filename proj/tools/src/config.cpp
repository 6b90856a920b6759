#include "dynnet/tools/config.hpp"

#include "dynnet/error.hpp"
#include "dynnet/tools/io.hpp"

#include <charconv>
#include <climits>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace dynnet::tools {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double to_double(const std::string& key, const std::string& v) {
  if (v == "pi") return 3.14159265358979323846;
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

long long to_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  const long long x = to_integer(key, v);
  if (x < INT_MIN || x > INT_MAX) throw ConfigError(key + ": out of range");
  return static_cast<int>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

Vec to_vec(const std::string& key, const std::string& v) {
  std::vector<double> values;
  std::istringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) values.push_back(to_double(key, trim(item)));
  if (values.empty()) throw ConfigError(key + ": empty vector");
  return Eigen::Map<const Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
}

std::string from_vec(const Vec& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += format_number(v(i));
  }
  return out;
}

struct Key {
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <class F>
Key number_key(F field) {
  return {[field](ExperimentConfig& c, const std::string& k, const std::string& v) {
            field(c) = to_double(k, v);
          },
          [field](const ExperimentConfig& c) {
            return format_number(field(const_cast<ExperimentConfig&>(c)));
          }};
}

template <class F>
Key int_key(F field) {
  return {[field](ExperimentConfig& c, const std::string& k, const std::string& v) {
            field(c) = to_int(k, v);
          },
          [field](const ExperimentConfig& c) {
            return std::to_string(field(const_cast<ExperimentConfig&>(c)));
          }};
}

template <class F>
Key seed_key(F field) {
  return {[field](ExperimentConfig& c, const std::string& k, const std::string& v) {
            const long long x = to_integer(k, v);
            if (x < 0) throw ConfigError(k + ": seed must be non-negative");
            field(c) = static_cast<std::uint64_t>(x);
          },
          [field](const ExperimentConfig& c) {
            return std::to_string(field(const_cast<ExperimentConfig&>(c)));
          }};
}

// Ordered as written to the resolved config.
const std::vector<std::pair<std::string, Key>>& keys() {
  static const std::vector<std::pair<std::string, Key>> table = {
      {"system",
       {[](ExperimentConfig& c, const std::string&, const std::string& v) { c.system = v; },
        [](const ExperimentConfig& c) { return c.system; }}},
      {"z0",
       {[](ExperimentConfig& c, const std::string& k, const std::string& v) { c.z0 = to_vec(k, v); },
        [](const ExperimentConfig& c) { return from_vec(c.z0); }}},
      {"T", number_key([](ExperimentConfig& c) -> double& { return c.horizon; })},
      {"output_dir",
       {[](ExperimentConfig& c, const std::string&, const std::string& v) { c.output_dir = v; },
        [](const ExperimentConfig& c) { return c.output_dir.string(); }}},
      {"net.H", int_key([](ExperimentConfig& c) -> int& { return c.hidden; })},
      {"net.seed", seed_key([](ExperimentConfig& c) -> std::uint64_t& { return c.net_seed; })},
      {"train.batch_size", int_key([](ExperimentConfig& c) -> int& { return c.train.batch_size; })},
      {"train.optimizer",
       {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
          if (v == "adam")
            c.train.optimizer.kind = OptimizerKind::Adam;
          else if (v == "sgd")
            c.train.optimizer.kind = OptimizerKind::Sgd;
          else
            throw ConfigError(k + ": expected adam or sgd, got '" + v + "'");
        },
        [](const ExperimentConfig& c) {
          return std::string(c.train.optimizer.kind == OptimizerKind::Adam ? "adam" : "sgd");
        }}},
      {"train.lr",
       number_key([](ExperimentConfig& c) -> double& { return c.train.optimizer.learning_rate; })},
      {"train.beta1", number_key([](ExperimentConfig& c) -> double& { return c.train.optimizer.beta1; })},
      {"train.beta2", number_key([](ExperimentConfig& c) -> double& { return c.train.optimizer.beta2; })},
      {"train.eps", number_key([](ExperimentConfig& c) -> double& { return c.train.optimizer.epsilon; })},
      {"train.max_iters", int_key([](ExperimentConfig& c) -> int& { return c.train.max_iters; })},
      {"train.loss_target", number_key([](ExperimentConfig& c) -> double& { return c.train.loss_target; })},
      {"train.snapshot_every", int_key([](ExperimentConfig& c) -> int& { return c.train.snapshot_every; })},
      {"train.seed", seed_key([](ExperimentConfig& c) -> std::uint64_t& { return c.train.seed; })},
      {"train.target_error", number_key([](ExperimentConfig& c) -> double& { return c.target_error; })},
      {"train.monitor_every", int_key([](ExperimentConfig& c) -> int& { return c.monitor_every; })},
      {"schedule.enabled",
       {[](ExperimentConfig& c, const std::string& k, const std::string& v) { c.phased = to_bool(k, v); },
        [](const ExperimentConfig& c) { return std::string(c.phased ? "true" : "false"); }}},
      {"schedule.tau_enter", number_key([](ExperimentConfig& c) -> double& { return c.schedule.tau_enter; })},
      {"schedule.tau_refresh",
       number_key([](ExperimentConfig& c) -> double& { return c.schedule.tau_refresh; })},
      {"schedule.burst_iters", int_key([](ExperimentConfig& c) -> int& { return c.schedule.burst_iters; })},
      {"schedule.k", int_key([](ExperimentConfig& c) -> int& { return c.schedule.k; })},
      {"schedule.max_cycles", int_key([](ExperimentConfig& c) -> int& { return c.schedule.max_cycles; })},
      {"schedule.phase_b_max_iters",
       int_key([](ExperimentConfig& c) -> int& { return c.schedule.phase_b_max_iters; })},
      {"schedule.phase_b_lr",
       number_key([](ExperimentConfig& c) -> double& { return c.schedule.phase_b_learning_rate; })},
      {"schedule.grid_step", number_key([](ExperimentConfig& c) -> double& { return c.schedule.grid_step; })},
      {"schedule.taylor_order", int_key([](ExperimentConfig& c) -> int& { return c.schedule.taylor_order; })},
      {"koopman.observable",
       {[](ExperimentConfig& c, const std::string&, const std::string& v) {
          c.koopman.observable = parse_observable(v);
        },
        [](const ExperimentConfig& c) { return std::string(observable_name(c.koopman.observable)); }}},
      {"koopman.rank", int_key([](ExperimentConfig& c) -> int& { return c.koopman.rank; })},
      {"koopman.window", int_key([](ExperimentConfig& c) -> int& { return c.koopman.window; })},
      {"koopman.stride", int_key([](ExperimentConfig& c) -> int& { return c.koopman.stride; })},
      {"koopman.p", int_key([](ExperimentConfig& c) -> int& { return c.koopman.p; })},
      {"koopman.gamma", number_key([](ExperimentConfig& c) -> double& { return c.koopman.gamma; })},
      {"koopman.enter_loss", number_key([](ExperimentConfig& c) -> double& { return c.koopman.enter_loss; })},
      {"analysis.grid_step", number_key([](ExperimentConfig& c) -> double& { return c.analysis.grid_step; })},
      {"analysis.trajectory_step",
       number_key([](ExperimentConfig& c) -> double& { return c.analysis.trajectory_step; })},
      {"analysis.h_max", number_key([](ExperimentConfig& c) -> double& { return c.analysis.h_max; })},
      {"benchmark.target_error",
       number_key([](ExperimentConfig& c) -> double& { return c.benchmark_target_error; })},
  };
  return table;
}

const Key* find_key(const std::string& name) {
  for (const auto& [k, v] : keys())
    if (k == name) return &v;
  return nullptr;
}

Vec default_z0(const std::string& system) {
  if (system == "henon_heiles") return Vec{{0.1, 0.0, 0.0, 0.3}};
  if (system == "harmonic_oscillator" || system == "nonlinear_pendulum" ||
      system == "cubic_oscillator")
    return Vec{{1.0, 0.0}};
  throw ConfigError("system '" + system + "' has no default z0; set z0 explicitly");
}

}  // namespace

std::vector<int> ExperimentConfig::layer_sizes() const {
  return {1, hidden, hidden, catalog_get(system).dim};
}

void ExperimentConfig::resolve() {
  const SystemDef def = catalog_get(system);
  if (z0.size() == 0) z0 = default_z0(system);
  if (z0.size() != def.dim)
    throw ConfigError("z0 has " + std::to_string(z0.size()) + " entries but system '" + system +
                      "' has dimension " + std::to_string(def.dim));
  if (!z0.allFinite()) throw ConfigError("z0 must be finite");
  if (hidden < 1) throw ConfigError("net.H must be positive");
  train.horizon = horizon;
  train.validate();
  if (!(train.optimizer.learning_rate > 0.0)) throw ConfigError("train.lr must be positive");
  if (!(target_error >= 0.0)) throw ConfigError("train.target_error must be non-negative");
  if (monitor_every < 1) throw ConfigError("train.monitor_every must be positive");
  schedule.validate();
  if (koopman.rank < 0) throw ConfigError("koopman.rank must be non-negative");
  if (koopman.window != 0 && koopman.window < 3)
    throw ConfigError("koopman.window must be 0 (all columns) or at least 3");
  if (koopman.stride < 1) throw ConfigError("koopman.stride must be positive");
  if (koopman.p < 0) throw ConfigError("koopman.p must be non-negative");
  if (!(koopman.gamma >= 0.0)) throw ConfigError("koopman.gamma must be non-negative");
  if (!(analysis.grid_step > 0.0 && analysis.grid_step <= horizon))
    throw ConfigError("analysis.grid_step must lie in (0, T]");
  if (!(analysis.trajectory_step > 0.0 && analysis.trajectory_step <= horizon))
    throw ConfigError("analysis.trajectory_step must lie in (0, T]");
  if (!(analysis.h_max > 0.0)) throw ConfigError("analysis.h_max must be positive");
  if (!(benchmark_target_error > 0.0)) throw ConfigError("benchmark.target_error must be positive");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig config;
  std::set<std::string> seen;
  bool schedule_keys = false;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section == "schedule") schedule_keys = true;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!section.empty()) key = section + "." + key;
    const Key* k = find_key(key);
    if (!k) throw ConfigError(where + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + ": duplicate key '" + key + "'");
    if (value.empty()) throw ConfigError(where + ": empty value for '" + key + "'");
    k->set(config, key, value);
    if (key.rfind("schedule.", 0) == 0 && key != "schedule.enabled") schedule_keys = true;
  }
  // A schedule section switches phased training on unless disabled explicitly.
  if (schedule_keys && !seen.count("schedule.enabled")) config.phased = true;
  config.resolve();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_text(path));
}

std::string resolved_text(const ExperimentConfig& config) {
  std::string out;
  for (const auto& [name, key] : keys()) out += name + " = " + key.get(config) + "\n";
  return out;
}

void override_seed(ExperimentConfig& config, std::uint64_t seed) {
  config.net_seed = seed;
  config.train.seed = seed;
}

}  // namespace dynnet::tools
