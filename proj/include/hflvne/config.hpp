#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hflvne/errors.hpp"
#include "hflvne/text_io.hpp"
#include "hflvne/workload.hpp"

namespace hflvne {

struct TrainingConfig {
  double learning_rate = 5.0;
  int batch_size = 50;  // episodes per domain before a local step
  int epochs = 30;
  double init_scale = 0.1;
  double rejection_reward = 0.0;
};

/// Everything that determines a run. Defaults reproduce the 4-domain,
/// 100-node, 600-link, 2000-request setup.
struct ExperimentConfig {
  SubstrateConfig substrate;
  WorkloadConfig workload;
  int train_size = 1000;
  int test_size = 1000;
  TrainingConfig training;
  std::uint64_t seed = 1;
  std::string policy = "hfl";
  double sample_interval = 100.0;
};

namespace detail {

struct ConfigKey {
  std::string name;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <class T>
T parse_value(const std::string& key, const std::string& raw);

template <>
inline int parse_value<int>(const std::string& key, const std::string& raw) {
  long long v = 0;
  if (!text::parse_int(raw, v) || v < INT32_MIN || v > INT32_MAX)
    throw ConfigError("config key '" + key + "': expected an integer, got '" + raw + "'");
  return static_cast<int>(v);
}

template <>
inline double parse_value<double>(const std::string& key, const std::string& raw) {
  double v = 0;
  if (!text::parse_real(raw, v)) throw ConfigError("config key '" + key + "': expected a number, got '" + raw + "'");
  return v;
}

template <>
inline std::uint64_t parse_value<std::uint64_t>(const std::string& key, const std::string& raw) {
  long long v = 0;
  if (!text::parse_int(raw, v) || v < 0)
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + raw + "'");
  return static_cast<std::uint64_t>(v);
}

template <>
inline std::string parse_value<std::string>(const std::string&, const std::string& raw) {
  return raw;
}

inline std::string show(int v) { return std::to_string(v); }
inline std::string show(std::uint64_t v) { return std::to_string(v); }
inline std::string show(double v) { return text::fmt(v); }
inline std::string show(const std::string& v) { return v; }

template <class T>
ConfigKey key(std::string name, T ExperimentConfig::*outer) {
  return {name, [name, outer](ExperimentConfig& c, const std::string& v) { c.*outer = parse_value<T>(name, v); },
          [outer](const ExperimentConfig& c) { return show(c.*outer); }};
}

template <class Group, class T>
ConfigKey key(std::string name, Group ExperimentConfig::*group, T Group::*field) {
  return {name,
          [name, group, field](ExperimentConfig& c, const std::string& v) { (c.*group).*field = parse_value<T>(name, v); },
          [group, field](const ExperimentConfig& c) { return show((c.*group).*field); }};
}

inline const std::vector<ConfigKey>& config_keys() {
  using E = ExperimentConfig;
  static const std::vector<ConfigKey> keys = {
      key("num_domains", &E::substrate, &SubstrateConfig::num_domains),
      key("nodes_per_domain", &E::substrate, &SubstrateConfig::nodes_per_domain),
      key("total_links", &E::substrate, &SubstrateConfig::total_links),
      key("intra_link_ratio", &E::substrate, &SubstrateConfig::intra_link_ratio),
      key("cpu_min", &E::substrate, &SubstrateConfig::cpu_min),
      key("cpu_max", &E::substrate, &SubstrateConfig::cpu_max),
      key("bw_min", &E::substrate, &SubstrateConfig::bw_min),
      key("bw_max", &E::substrate, &SubstrateConfig::bw_max),
      key("grid_size", &E::substrate, &SubstrateConfig::grid_size),
      key("vnr_count", &E::workload, &WorkloadConfig::vnr_count),
      key("train_size", &E::train_size),
      key("test_size", &E::test_size),
      key("vnode_min", &E::workload, &WorkloadConfig::vnode_min),
      key("vnode_max", &E::workload, &WorkloadConfig::vnode_max),
      key("vlink_probability", &E::workload, &WorkloadConfig::vlink_probability),
      key("vcpu_min", &E::workload, &WorkloadConfig::vcpu_min),
      key("vcpu_max", &E::workload, &WorkloadConfig::vcpu_max),
      key("vbw_min", &E::workload, &WorkloadConfig::vbw_min),
      key("vbw_max", &E::workload, &WorkloadConfig::vbw_max),
      key("arrival_rate", &E::workload, &WorkloadConfig::arrival_rate),
      key("mean_lifetime", &E::workload, &WorkloadConfig::mean_lifetime),
      key("learning_rate", &E::training, &TrainingConfig::learning_rate),
      key("batch_size", &E::training, &TrainingConfig::batch_size),
      key("epochs", &E::training, &TrainingConfig::epochs),
      key("init_scale", &E::training, &TrainingConfig::init_scale),
      key("rejection_reward", &E::training, &TrainingConfig::rejection_reward),
      key("seed", &E::seed),
      key("policy", &E::policy),
      key("sample_interval", &E::sample_interval),
  };
  return keys;
}

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Sets one key; throws ConfigError for unknown keys or malformed values.
inline void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  for (const auto& k : detail::config_keys())
    if (k.name == key) return k.set(c, detail::trim(value));
  throw ConfigError("unknown config key '" + key + "'");
}

/// Applies a `key=value` assignment.
inline void apply_assignment(ExperimentConfig& c, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  set_config_value(c, detail::trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

inline void validate_config(const ExperimentConfig& c) {
  auto positive = [](const char* name, double v) {
    if (!(v > 0)) throw ConfigError(std::string(name) + " must be positive");
  };
  auto ordered = [](const char* name, double lo, double hi) {
    if (!(lo <= hi)) throw ConfigError(std::string(name) + " range is empty (min > max)");
  };
  const auto& s = c.substrate;
  const auto& w = c.workload;
  positive("num_domains", s.num_domains);
  positive("nodes_per_domain", s.nodes_per_domain);
  positive("total_links", s.total_links);
  positive("grid_size", s.grid_size);
  if (!(s.intra_link_ratio >= 0.0 && s.intra_link_ratio <= 1.0)) throw ConfigError("intra_link_ratio must lie in [0, 1]");
  positive("cpu_min", s.cpu_min);
  positive("bw_min", s.bw_min);
  ordered("cpu", s.cpu_min, s.cpu_max);
  ordered("bw", s.bw_min, s.bw_max);
  if (w.vnr_count < 0) throw ConfigError("vnr_count must be non-negative");
  if (c.train_size < 0 || c.test_size < 0) throw ConfigError("split sizes must be non-negative");
  if (c.train_size + c.test_size > w.vnr_count) throw ConfigError("train_size + test_size exceeds vnr_count");
  positive("vnode_min", w.vnode_min);
  ordered("vnode", w.vnode_min, w.vnode_max);
  if (!(w.vlink_probability >= 0.0 && w.vlink_probability <= 1.0)) throw ConfigError("vlink_probability must lie in [0, 1]");
  positive("vcpu_min", w.vcpu_min);
  positive("vbw_min", w.vbw_min);
  ordered("vcpu", w.vcpu_min, w.vcpu_max);
  ordered("vbw", w.vbw_min, w.vbw_max);
  positive("arrival_rate", w.arrival_rate);
  positive("mean_lifetime", w.mean_lifetime);
  positive("learning_rate", c.training.learning_rate);
  positive("batch_size", c.training.batch_size);
  positive("epochs", c.training.epochs);
  if (!(c.training.init_scale >= 0.0)) throw ConfigError("init_scale must be non-negative");
  positive("sample_interval", c.sample_interval);
  if (c.policy != "hfl" && c.policy != "noderank" && c.policy != "random")
    throw ConfigError("policy must be one of hfl, noderank, random");
}

/// Parses a flat `key = value` file; `#` starts a comment line.
inline ExperimentConfig parse_config(std::istream& in, const std::string& source = "config") {
  ExperimentConfig c;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    auto t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    try {
      apply_assignment(c, t);
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  validate_config(c);
  return c;
}

/// Every key in canonical order, one `key=value` per line.
inline void write_config(std::ostream& out, const ExperimentConfig& c) {
  for (const auto& k : detail::config_keys()) out << k.name << '=' << k.get(c) << '\n';
}

inline std::string config_to_string(const ExperimentConfig& c) {
  std::ostringstream ss;
  write_config(ss, c);
  return ss.str();
}

}  // namespace hflvne
