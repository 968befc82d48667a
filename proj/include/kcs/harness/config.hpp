// Flat typed key-value configuration in TOML-compatible syntax:
// [section] headers, `key = value` with numbers, booleans, strings and
// numeric arrays, `#` comments.
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "kcs/domain.hpp"

namespace kcs::harness {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using ConfigValue = std::variant<double, bool, std::string, std::vector<double>>;

class Config {
 public:
  static Config parse(const std::string& text, const std::string& origin = "<string>");
  static Config load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  /// Later values override earlier ones key by key.
  void merge(const Config& other);
  void set(const std::string& key, ConfigValue v) { values_[key] = std::move(v); }

  double number(const std::string& key, double fallback) const;
  long integer(const std::string& key, long fallback) const;
  bool boolean(const std::string& key, bool fallback) const;
  std::string string(const std::string& key, const std::string& fallback) const;
  std::vector<double> list(const std::string& key, const std::vector<double>& fallback) const;

  std::vector<std::string> keys() const;

 private:
  std::map<std::string, ConfigValue> values_;
};

struct ExperimentConfig {
  std::string name = "experiment";
  InitialDataSpec initial;
  CommKernel kernel{1.0, 1.0};

  int kinetic_grid = 64;
  double kinetic_dt = 1e-3;
  CellKernel::Path convolution = CellKernel::Path::direct;

  int euler_grid = 64;
  double euler_dt = 1e-3;
  double safeguard = 0.5;

  double horizon = 0.5;
  std::vector<double> epsilons{0.2, 0.1, 0.05, 0.025};
  int sample_every = 10;
  double fit_time = 0.5;
  std::size_t meanfield_particles = 256;
  double h2_constant = 1.0;
  double energy_bound = 10.0;
  std::uint64_t seed = 0;
  int threads = 1;
  std::filesystem::path output = "out";

  /// Throws ConfigError on a violated invariant.
  void validate() const;
};

/// Every key the loader understands, with its default, as TOML text.
std::string default_config_text();

/// Builds a config from defaults overridden by `cfg`; rejects unknown keys.
ExperimentConfig experiment_config(const Config& cfg);

}  // namespace kcs::harness
