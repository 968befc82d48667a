#include "kcs/harness/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace kcs::harness {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Drops a trailing comment that is not inside a string.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& what) {
  throw ConfigError(origin + ":" + std::to_string(line) + ": " + what);
}

double parse_number(std::string token, const std::string& origin, int line) {
  token.erase(std::remove(token.begin(), token.end(), '_'), token.end());
  if (token == "inf" || token == "+inf") return std::numeric_limits<double>::infinity();
  if (token == "-inf") return -std::numeric_limits<double>::infinity();
  if (token == "nan" || token == "+nan" || token == "-nan") fail(origin, line, "nan is not a valid setting");
  const char* begin = token.data();
  if (!token.empty() && token[0] == '+') ++begin;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(begin, token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) fail(origin, line, "cannot parse value '" + token + "'");
  return v;
}

ConfigValue parse_value(const std::string& raw, const std::string& origin, int line) {
  const std::string v = trim(raw);
  if (v.empty()) fail(origin, line, "missing value");
  if (v == "true") return true;
  if (v == "false") return false;
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') fail(origin, line, "unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
      if (v[i] == '\\' && i + 2 < v.size()) {
        const char c = v[++i];
        out += c == 'n' ? '\n' : c == 't' ? '\t' : c;
      } else {
        out += v[i];
      }
    }
    return out;
  }
  if (v.front() == '[') {
    if (v.back() != ']') fail(origin, line, "unterminated array");
    std::vector<double> items;
    std::stringstream ss(v.substr(1, v.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      items.push_back(parse_number(item, origin, line));
    }
    return items;
  }
  return parse_number(v, origin, line);
}

const char* kDefaults = R"(# Reference configuration: every recognized key with its default value.

[domain]
dim = 1
# Fourier profiles: mean plus (kx, ky, cos, sin) quadruples for cos/sin(2 pi k.x).
rho0_mean = 1.0
rho0_modes = [1, 0, 0.2, 0.0]
u0x_mean = 0.0
u0x_modes = [1, 0, 0.0, 0.1]
u0y_mean = 0.0
u0y_modes = []
kernel_lambda = 1.0
kernel_beta = 1.0

[kinetic]
particles = 100000
grid = 64
dt = 0.001
epsilon = 0.1
# Per-axis Gaussian velocity variance of the initial ensemble; negative means epsilon.
thermal_variance = -1.0
# "direct" or "fft"
convolution = "direct"

[euler]
grid = 64
dt = 0.001
safeguard = 0.5

[experiment]
name = "experiment"
horizon = 0.5
epsilons = [0.2, 0.1, 0.05, 0.025]
sample_every = 10
fit_time = 0.5
meanfield_particles = 256
h2_constant = 1.0
energy_bound = 10.0
seed = 0
threads = 1
output = "out"
)";

FourierProfile profile(const Config& c, const std::string& prefix, int dim) {
  FourierProfile p;
  p.mean = c.number(prefix + "_mean", 0.0);
  const auto modes = c.list(prefix + "_modes", {});
  if (modes.size() % 4 != 0) throw ConfigError(prefix + "_modes must hold (kx, ky, cos, sin) quadruples");
  for (std::size_t i = 0; i < modes.size(); i += 4) {
    FourierMode m;
    m.wavenumber = {static_cast<int>(modes[i]), dim == 2 ? static_cast<int>(modes[i + 1]) : 0};
    if (m.wavenumber[0] != modes[i] || m.wavenumber[1] != (dim == 2 ? modes[i + 1] : 0.0))
      throw ConfigError(prefix + "_modes: wavenumbers must be integers (ky = 0 in 1D)");
    m.cos_amp = modes[i + 2];
    m.sin_amp = modes[i + 3];
    p.modes.push_back(m);
  }
  return p;
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& origin) {
  Config c;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[' && line.find('=') == std::string::npos) {
      if (line.back() != ']') fail(origin, line_no, "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) fail(origin, line_no, "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(origin, line_no, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    std::string value = line.substr(eq + 1);
    // Arrays may continue over several lines.
    const int start_line = line_no;
    while (std::count(value.begin(), value.end(), '[') > std::count(value.begin(), value.end(), ']')) {
      if (!std::getline(in, raw)) fail(origin, start_line, "unterminated array");
      ++line_no;
      value += " " + trim(strip_comment(raw));
    }
    if (key.empty()) fail(origin, line_no, "empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (c.values_.count(full)) fail(origin, line_no, "duplicate key " + full);
    c.values_[full] = parse_value(value, origin, start_line);
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str(), path.string());
}

void Config::merge(const Config& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

double Config::number(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (const auto* d = std::get_if<double>(&it->second)) return *d;
  throw ConfigError(key + " must be a number");
}

long Config::integer(const std::string& key, long fallback) const {
  const double v = number(key, static_cast<double>(fallback));
  if (v != std::floor(v) || std::abs(v) > 9.0e15) throw ConfigError(key + " must be an integer");
  return static_cast<long>(v);
}

bool Config::boolean(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (const auto* b = std::get_if<bool>(&it->second)) return *b;
  throw ConfigError(key + " must be true or false");
}

std::string Config::string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
  throw ConfigError(key + " must be a string");
}

std::vector<double> Config::list(const std::string& key, const std::vector<double>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (const auto* l = std::get_if<std::vector<double>>(&it->second)) return *l;
  throw ConfigError(key + " must be an array of numbers");
}

std::vector<std::string> Config::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) out.push_back(k);
  return out;
}

std::string default_config_text() { return kDefaults; }

void ExperimentConfig::validate() const {
  try {
    initial.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("initial data: ") + e.what());
  }
  if (kinetic_grid < 2 || euler_grid < 2) throw ConfigError("grids need at least 2 cells per axis");
  if (!(kinetic_dt > 0.0) || !(euler_dt > 0.0)) throw ConfigError("time steps must be positive");
  if (!(horizon > 0.0)) throw ConfigError("experiment.horizon must be positive");
  if (!(safeguard > 0.0)) throw ConfigError("euler.safeguard must be positive");
  if (sample_every < 1) throw ConfigError("experiment.sample_every must be at least 1");
  if (threads < 1) throw ConfigError("experiment.threads must be at least 1");
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (!(epsilons[i] > 0.0)) throw ConfigError("experiment.epsilons must be positive");
    if (i > 0 && !(epsilons[i] < epsilons[i - 1])) throw ConfigError("experiment.epsilons must be strictly decreasing");
  }
  if (!(kernel.lambda() > 0.0) || kernel.beta() < 0.0) throw ConfigError("kernel needs lambda > 0 and beta >= 0");
}

ExperimentConfig experiment_config(const Config& user) {
  Config c = Config::parse(kDefaults, "<defaults>");
  const auto known = c.keys();
  const std::set<std::string> known_set(known.begin(), known.end());
  for (const auto& k : user.keys())
    if (!known_set.count(k)) throw ConfigError("unknown config key " + k);
  c.merge(user);

  ExperimentConfig e;
  const int dim = static_cast<int>(c.integer("domain.dim", 1));
  if (dim < 1 || dim > kMaxDim) throw ConfigError("domain.dim must be 1 or 2");
  e.initial.dim = dim;
  e.initial.rho0 = profile(c, "domain.rho0", dim);
  e.initial.u0[0] = profile(c, "domain.u0x", dim);
  e.initial.u0[1] = dim == 2 ? profile(c, "domain.u0y", dim) : FourierProfile{};
  const double lambda = c.number("domain.kernel_lambda", 1.0);
  const double beta = c.number("domain.kernel_beta", 1.0);
  if (!(lambda > 0.0) || beta < 0.0) throw ConfigError("kernel needs lambda > 0 and beta >= 0");
  e.kernel = CommKernel(lambda, beta);

  const long particles = c.integer("kinetic.particles", 100000);
  if (particles < 1) throw ConfigError("kinetic.particles must be positive");
  e.initial.particle_count = static_cast<std::size_t>(particles);
  e.initial.epsilon = c.number("kinetic.epsilon", 0.1);
  const double tv = c.number("kinetic.thermal_variance", -1.0);
  if (tv >= 0.0) e.initial.thermal_variance = tv;
  e.kinetic_grid = static_cast<int>(c.integer("kinetic.grid", 64));
  e.kinetic_dt = c.number("kinetic.dt", 1e-3);
  const std::string conv = c.string("kinetic.convolution", "direct");
  if (conv == "direct")
    e.convolution = CellKernel::Path::direct;
  else if (conv == "fft")
    e.convolution = CellKernel::Path::fft;
  else
    throw ConfigError("kinetic.convolution must be \"direct\" or \"fft\"");

  e.euler_grid = static_cast<int>(c.integer("euler.grid", 64));
  e.euler_dt = c.number("euler.dt", 1e-3);
  e.safeguard = c.number("euler.safeguard", 0.5);

  e.name = c.string("experiment.name", "experiment");
  e.horizon = c.number("experiment.horizon", 0.5);
  e.epsilons = c.list("experiment.epsilons", e.epsilons);
  e.sample_every = static_cast<int>(c.integer("experiment.sample_every", 10));
  e.fit_time = c.number("experiment.fit_time", 0.5);
  const long mf = c.integer("experiment.meanfield_particles", 256);
  if (mf < 1) throw ConfigError("experiment.meanfield_particles must be positive");
  e.meanfield_particles = static_cast<std::size_t>(mf);
  e.h2_constant = c.number("experiment.h2_constant", 1.0);
  e.energy_bound = c.number("experiment.energy_bound", 10.0);
  const long seed = c.integer("experiment.seed", 0);
  if (seed < 0) throw ConfigError("experiment.seed must be nonnegative");
  e.seed = static_cast<std::uint64_t>(seed);
  e.initial.seed = e.seed;
  e.threads = static_cast<int>(c.integer("experiment.threads", 1));
  e.output = c.string("experiment.output", "out");
  e.validate();
  return e;
}

}  // namespace kcs::harness
