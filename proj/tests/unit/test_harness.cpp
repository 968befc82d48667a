#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kcs/harness/experiments.hpp"
#include "kcs/rng.hpp"

using namespace kcs;
using namespace kcs::harness;

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("kcs_test_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig small_config(const std::string& extra = "") {
  return experiment_config(Config::parse(R"(
[kinetic]
particles = 4000
grid = 16
dt = 0.01
epsilon = 0.1
[euler]
grid = 32
dt = 0.01
[experiment]
horizon = 0.2
fit_time = 0.2
sample_every = 5
meanfield_particles = 64
)" + extra));
}

}  // namespace

TEST_CASE("config parsing: sections, types, arrays, comments") {
  const Config c = Config::parse(R"(
# comment
top = 3
[kinetic]
dt = 1e-3   # trailing comment
particles = 100_000
flag = true
path = "a # not a comment"
list = [1, 2.5,
        -3]
big = inf
)");
  CHECK(c.number("top", 0) == 3.0);
  CHECK(c.number("kinetic.dt", 0) == 1e-3);
  CHECK(c.integer("kinetic.particles", 0) == 100000);
  CHECK(c.boolean("kinetic.flag", false));
  CHECK(c.string("kinetic.path", "") == "a # not a comment");
  CHECK(c.list("kinetic.list", {}) == std::vector<double>{1, 2.5, -3});
  CHECK(std::isinf(c.number("kinetic.big", 0)));
  CHECK(c.number("kinetic.missing", 7.0) == 7.0);
  CHECK_THROWS_AS(c.integer("kinetic.dt", 0), ConfigError);
  CHECK_THROWS_AS(c.string("kinetic.dt", ""), ConfigError);
}

TEST_CASE("config parsing rejects malformed input") {
  CHECK_THROWS_AS(Config::parse("[a]\nx = 1\nx = 2\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse("x = \"open\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse("x = [1, 2\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse("x = nan\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse("x = 1abc\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse("[broken\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse("novalue\n"), ConfigError);
  CHECK_THROWS_AS(experiment_config(Config::parse("[kinetic]\nparticle = 5\n")), ConfigError);
  CHECK_THROWS_AS(experiment_config(Config::parse("[kinetic]\ndt = -1\n")), ConfigError);
  CHECK_THROWS_AS(experiment_config(Config::parse("[experiment]\nepsilons = [0.1, 0.2]\n")), ConfigError);
  CHECK_THROWS_AS(experiment_config(Config::parse("[domain]\nrho0_modes = [1, 0, 0.2]\n")), ConfigError);
  CHECK_THROWS_AS(experiment_config(Config::parse("[kinetic]\nconvolution = \"spectral\"\n")), ConfigError);
  CHECK_THROWS_AS(Config::load("/nonexistent/kcs.toml"), ConfigError);
}

TEST_CASE("defaults: reference file matches the built-in text and fills every field") {
  CHECK(slurp(fs::path(KCS_SOURCE_DIR) / "configs" / "defaults.toml") == default_config_text());
  const ExperimentConfig d = experiment_config(Config{});
  const ExperimentConfig e = experiment_config(Config::parse(default_config_text()));
  CHECK(d.kinetic_grid == 64);
  CHECK(d.initial.particle_count == 100000);
  CHECK(d.initial.epsilon == 0.1);
  CHECK_FALSE(d.initial.thermal_variance.has_value());
  CHECK(d.epsilons == std::vector<double>{0.2, 0.1, 0.05, 0.025});
  CHECK(e.kinetic_dt == d.kinetic_dt);
  CHECK(e.kernel.beta() == d.kernel.beta());
  const ExperimentConfig mono = experiment_config(Config::parse("[kinetic]\nthermal_variance = 0.0\n"));
  CHECK(mono.initial.velocity_variance() == 0.0);
}

TEST_CASE("every shipped config loads") {
  int count = 0;
  for (const auto& entry : fs::directory_iterator(fs::path(KCS_SOURCE_DIR) / "configs")) {
    if (entry.path().extension() != ".toml") continue;
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(experiment_config(Config::load(entry.path())));
    ++count;
  }
  CHECK(count >= 6);
}

TEST_CASE("CSV output follows RFC 4180 with 17 significant digits") {
  CsvTable t({"name", "value", "count"});
  t.add_row({std::string("plain"), 0.1, 3LL});
  t.add_row({std::string("with,comma \"quoted\""), 1.0 / 3.0, -1LL});
  CHECK(t.str() ==
        "name,value,count\r\n"
        "plain,0.10000000000000001,3\r\n"
        "\"with,comma \"\"quoted\"\"\",0.33333333333333331,-1\r\n");
  CHECK_THROWS(t.add_row({1.0}));
  for (int i = 0; i < 1000; ++i) {
    const double x = std::ldexp(rng::normal(1, i, 0), static_cast<int>(rng::uniform(1, i, 1) * 200) - 100);
    CHECK(std::strtod(format_double(x).c_str(), nullptr) == x);
  }
}

TEST_CASE("checkpoint layout and round trip") {
  Checkpoint c;
  c.time = 0.75;
  c.ensemble.dim = 2;
  c.ensemble.positions = {0.1, 0.2, 0.3, 0.4};
  c.ensemble.velocities = {-1.0, 2.0, 1e-300, -0.0};
  c.ensemble.weights = {0.25, 0.75};
  const auto bytes = encode_checkpoint(c);
  CHECK(bytes.size() == 4 + 8 + 8 + 3 * 8 + 10 * 8);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "KCS1");
  CHECK(bytes[4] == 2);  // dim, little-endian
  for (int i = 5; i < 12; ++i) CHECK(bytes[i] == 0);
  // time = 0.75 = 0x3FE8000000000000, least significant byte first
  CHECK(bytes[12 + 7] == 0x3F);
  CHECK(bytes[12 + 6] == 0xE8);
  CHECK(bytes[20] == 4);  // positions length

  const fs::path dir = scratch("ckpt");
  save_checkpoint(dir / "c.kcs1", c);
  const Checkpoint back = load_checkpoint(dir / "c.kcs1");
  CHECK(back.time == c.time);
  CHECK(back.ensemble.dim == 2);
  CHECK(back.ensemble.positions == c.ensemble.positions);
  CHECK(back.ensemble.velocities == c.ensemble.velocities);
  CHECK(std::signbit(back.ensemble.velocities[3]));
  CHECK(back.ensemble.weights == c.ensemble.weights);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS(decode_checkpoint(bad));
  auto cut = bytes;
  cut.pop_back();
  CHECK_THROWS(decode_checkpoint(cut));
  auto extra = bytes;
  extra.push_back(0);
  CHECK_THROWS(decode_checkpoint(extra));
}

TEST_CASE("least-squares fit") {
  const LinearFit exact = fit_line({0, 1, 2, 3}, {1, 3, 5, 7});
  CHECK(exact.slope == doctest::Approx(2.0));
  CHECK(exact.intercept == doctest::Approx(1.0));
  CHECK(exact.standard_error == doctest::Approx(0.0));
  // Residuals (+1, -2, +1) about slope 1: SSR = 6, Sxx = 2, SE = sqrt(6 / 1 / 2).
  const LinearFit noisy = fit_line({0, 1, 2}, {1, -1, 3});
  CHECK(noisy.slope == doctest::Approx(1.0));
  CHECK(noisy.standard_error == doctest::Approx(std::sqrt(3.0)));
  CHECK_THROWS(fit_line({1.0}, {2.0}));
  CHECK_THROWS(fit_line({1.0, 1.0}, {2.0, 3.0}));
}

TEST_CASE("restriction to a coarser grid conserves mass and momentum") {
  InitialDataSpec spec;
  spec.dim = 2;
  spec.rho0 = {1.0, {{{1, 2}, 0.3, 0.1}}};
  spec.u0[0] = {0.1, {{{1, 0}, 0.0, 0.2}}};
  spec.u0[1] = {0.0, {{{0, 1}, 0.1, 0.0}}};
  const FluidState fine = project_initial_fluid(spec, Grid(16, 2));
  const FluidState coarse = restrict_fluid(fine, Grid(4, 2));
  CHECK(coarse.mass() == doctest::Approx(fine.mass()).epsilon(1e-14));
  CHECK(coarse.momentum()[0] == doctest::Approx(fine.momentum()[0]).epsilon(1e-13));
  CHECK(coarse.momentum()[1] == doctest::Approx(fine.momentum()[1]).epsilon(1e-13));
  CHECK_THROWS(restrict_fluid(fine, Grid(5, 2)));
  CHECK(restrict_fluid(fine, Grid(16, 2)).rho == fine.rho);
}

TEST_CASE("sample times include zero, the fit time and the horizon") {
  ExperimentConfig c = small_config();
  c.fit_time = 0.13;
  const auto t = sample_times(c);
  CHECK(t.front() == 0.0);
  CHECK(t.back() == doctest::Approx(0.2));
  CHECK(std::count_if(t.begin(), t.end(), [](double s) { return std::abs(s - 0.13) < 1e-12; }) == 1);
  CHECK(std::is_sorted(t.begin(), t.end()));
}

TEST_CASE("small experiments run end to end and write their outputs") {
  const ExperimentConfig c = small_config();

  const MeanfieldReport mf = run_meanfield_consistency(c);
  CHECK(mf.pass);
  CHECK(mf.max_mean_gap <= 1e-10);

  ExperimentConfig flock = small_config("[domain]\nkernel_beta = 0.0\n");
  flock.initial.epsilon = 1.0;
  const DecayReport decay = run_flocking_decay(flock);
  CHECK(decay.pass);
  CHECK(decay.theoretical_rate == doctest::Approx(2.0));

  const AuditRun audit = run_audit(c);
  CHECK(audit.report.entries.size() == 7);
  for (const char* h : {"H1", "H2", "H3", "H4", "H5", "H6", "H7"}) CHECK(std::isfinite(audit.report.at(h).margin));
  CHECK(audit.run.rows.size() == sample_times(c).size());

  const fs::path dir = scratch("audit");
  audit.write(dir);
  for (const char* f : {"paired_series.csv", "snapshots.csv", "audit.csv", "summary.json"}) CHECK(fs::exists(dir / f));
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(summary.contains("pass"));
  CHECK(slurp(dir / "snapshots.csv").rfind("t,cell,rho_eps,u_eps_x,trace_stress\r\n", 0) == 0);

  const fs::path ddir = scratch("decay");
  decay.write(ddir);
  const Checkpoint last = load_checkpoint(ddir / "final_state.kcs1");
  CHECK(last.time == doctest::Approx(0.2));
  CHECK(last.ensemble.size() == 4000);
}

TEST_CASE("a run whose Euler solution steepens past the safeguard reports the breach") {
  ExperimentConfig c = small_config("[domain]\nu0x_modes = [1, 0, 0.0, 3.0]\n[euler]\nsafeguard = 0.05\n");
  const PairedRun run = run_paired(c, 0.1);
  CHECK(run.breached);
  CHECK(run.usable_horizon < c.horizon);
  CHECK_FALSE(run.breach_message.empty());
}

TEST_CASE("metrics self-test passes on a small batch") {
  const SelftestReport r = run_metrics_selftest(5, 40, 10, 64);
  CHECK(r.pass);
  CHECK(r.w1_violations == 0);
}
