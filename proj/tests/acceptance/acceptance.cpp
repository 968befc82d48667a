// One pass/fail line per acceptance criterion; exit status 0 iff all pass.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "kcs/harness/experiments.hpp"
#include "kcs/rng.hpp"

using namespace kcs;
using namespace kcs::harness;

namespace {

const std::filesystem::path kConfigs = std::filesystem::path(KCS_SOURCE_DIR) / "configs";

ExperimentConfig load(const std::string& name, const std::string& extra = "") {
  Config c = Config::load(kConfigs / name);
  c.merge(Config::parse(extra));
  return experiment_config(c);
}

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Outcome decay(const std::string& config) {
  const auto start = std::chrono::steady_clock::now();
  const DecayReport r = run_flocking_decay(load(config));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {r.pass && secs <= 120.0,
          fmt("rate %.4g (need >= %.4g), worst E/(E0 exp(-%.3g t)) = %.6f", r.fitted_rate,
              kDecayRateFraction * r.theoretical_rate, r.theoretical_rate, r.worst_envelope_ratio) +
              fmt(", %.1f s", secs)};
}

Outcome entropy() {
  const EntropyCheck r = run_entropy_check(load("defaults.toml", "[kinetic]\nepsilon = 0.1\n[experiment]\nhorizon = 1.0\n"));
  return {r.pass, fmt("min margin %.3e >= -%.3e over %g steps", r.min_margin, r.allowance,
                      static_cast<double>(r.ledger.rows.size() - 1))};
}

Outcome dissipation_bound() {
  double worst = -1e300, worst_particle = -1e300;
  std::size_t particle_violations = 0;
  for (std::uint64_t t = 0; t < 500; ++t) {
    const int dim = 1 + static_cast<int>(t % 2);
    const std::size_t n = 2 + static_cast<std::size_t>(rng::uniform(77, t, 0) * 999);
    const int cells = dim == 1 ? 4 + static_cast<int>(rng::uniform(77, t, 1) * 60) : 2 + static_cast<int>(rng::uniform(77, t, 1) * 10);
    const CommKernel k(0.5 + rng::uniform(77, t, 2), 3.0 * rng::uniform(77, t, 3));
    ParticleEnsemble e;
    e.dim = dim;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (int a = 0; a < dim; ++a) {
        e.positions.push_back(rng::uniform(t, i, 10 + a));
        e.velocities.push_back(rng::normal(t, i, 20 + a));
      }
      e.weights.push_back(0.1 + rng::uniform(t, i, 30));
      total += e.weights.back();
    }
    for (double& w : e.weights) w /= total;
    const Grid g(cells, dim);
    const MomentSet m = local_moments(e, g);
    const double tilde = dissipation_d2_tilde(m, k);
    const double d2 = dissipation_d2(e, k, KernelSampling::cell_center, &g);
    const double d2p = dissipation_d2(e, k, KernelSampling::particle);
    worst = std::max(worst, tilde - d2);
    worst_particle = std::max(worst_particle, tilde - d2p);
    if (tilde > d2p + 1e-10) ++particle_violations;
  }
  return {worst <= 1e-10, fmt("max(D2~ - D2) = %.3e <= 1e-10 (cell-center kernel); particle kernel: max %.3e, %g cases above",
                              worst, worst_particle, static_cast<double>(particle_violations))};
}

Outcome w2_l1_bound(const SelftestReport& r) {
  return {r.min_bound_margin >= -r.bound_allowance,
          fmt("min (d/8)L1 - W2^2 = %.3e >= -%.3e on %g pairs at G=256", r.min_bound_margin, r.bound_allowance,
              static_cast<double>(r.density_pairs))};
}

Outcome ot(const SelftestReport& r) {
  return {r.max_circle_lp_gap <= 1e-9 && r.max_marginal_error <= 1e-12 && r.w1_violations == 0,
          fmt("|circle - LP| <= %.2e, marginal error %.2e, W1 > W2 in %g of %g pairs", r.max_circle_lp_gap,
              r.max_marginal_error, static_cast<double>(r.w1_violations), static_cast<double>(r.circle_pairs))};
}

Outcome sweep() {
  const auto start = std::chrono::steady_clock::now();
  const ExperimentConfig cfg = load("sweep.toml");
  const SweepReport r = run_epsilon_sweep(cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  r.write(std::filesystem::temp_directory_path() / "kcs_acceptance_sweep");
  std::string d = fmt("slope %.3f +- %.3f (need >= 0.8)", r.slope, r.slope_standard_error);
  d += fmt(", Q(eps_min) = %.3e, measured floor %.3e (sampling %.3e, grid %.3e)", r.rows.empty() ? 0.0 : r.rows.back().q,
           r.floor_q, r.sampling_floor_q, r.discretization_floor_q);
  d += std::string(", floor-limited ") + (r.floor_limited ? "yes" : "no") + fmt(", %.0f s", secs);
  return {r.pass && secs <= 900.0, d};
}

Outcome monokinetic() {
  const MonokineticReport r = run_monokinetic_check(load("monokinetic.toml"));
  return {r.pass, fmt("max E1 = %.3e <= 10 h^2 |grad u|^2 = %.3e over t <= %.3g", r.max_e1, r.bound, r.window)};
}

Outcome identities() {
  double worst_eta = 0.0, worst_flux = 0.0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const int d = 1 + static_cast<int>(s % 2);
    const double q = 0.05 + 3.0 * rng::uniform(s, 0, 1), r = 0.05 + 3.0 * rng::uniform(s, 0, 2);
    double w[2], u[2], mv[2], mu[2];
    double mv2 = 0, mu2 = 0, u2 = 0, udm = 0;
    for (int k = 0; k < d; ++k) {
      w[k] = 6.0 * rng::uniform(s, k, 3) - 3.0;
      u[k] = 6.0 * rng::uniform(s, k, 4) - 3.0;
      mv[k] = q * w[k];
      mu[k] = r * u[k];
      mv2 += mv[k] * mv[k];
      mu2 += mu[k] * mu[k];
      u2 += u[k] * u[k];
      udm += u[k] * (mv[k] - mu[k]);
    }
    const double eta_def = mv2 / (2 * q) - mu2 / (2 * r) - (-0.5 * u2 * (q - r) + udm);
    const auto dd = static_cast<std::size_t>(d);
    worst_eta = std::max(worst_eta, std::abs(relative_entropy_density(q, {w, dd}, {u, dd}) - eta_def));

    HydroPair p;
    p.u_eps.grid = p.u.grid = Grid(2, d);
    const std::size_t cells = p.u.grid.cell_count();
    p.u_eps.occupied.assign(cells, 1);
    p.u_eps.rho_eps.assign(cells, q);
    p.u.rho.assign(cells, r);
    for (std::size_t c = 0; c < cells; ++c)
      for (int k = 0; k < d; ++k) {
        p.u_eps.u_eps.push_back(w[k]);
        p.u.u.push_back(u[k]);
      }
    const auto a = relative_flux(p);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        const double def = mv[i] * mv[j] / q - mu[i] * mu[j] / r -
                           (-u[i] * u[j] * (q - r) + (mv[i] - mu[i]) * u[j] + u[i] * (mv[j] - mu[j]));
        worst_flux = std::max(worst_flux, std::abs(a[i * d + j] - def));
      }
  }
  return {worst_eta <= 1e-12 && worst_flux <= 1e-12,
          fmt("max |eta closed - definition| = %.2e, max |A closed - definition| = %.2e on 1000 states", worst_eta, worst_flux)};
}

Outcome conservation() {
  const ExperimentConfig cfg = load("defaults.toml", "[kinetic]\nparticles = 20000\n[euler]\ngrid = 128\n");
  KineticRunState ks;
  ks.ensemble = build_initial_ensemble(cfg.initial);
  ks.epsilon = cfg.initial.epsilon;
  ks.kernel = cfg.kernel;
  ks.grid = Grid(cfg.kinetic_grid, 1);
  const auto weights = ks.ensemble.weights;
  const Vec p0 = ks.ensemble.total_momentum();
  const double dt = cfg.kinetic_dt;
  double f = kinetic_entropy(ks.ensemble), worst_rise = -1e300;
  const double f0 = f;
  for (int n = 0; n < 1000; ++n) {
    ks = kinetic_step(std::move(ks), dt);
    const double f1 = kinetic_entropy(ks.ensemble);
    worst_rise = std::max(worst_rise, (f1 - f) / (dt * dt * f0));
    f = f1;
  }
  const double kin_drift = std::abs(ks.ensemble.total_momentum()[0] - p0[0]);
  const bool mass_exact = ks.ensemble.weights == weights;

  EulerRunState es = make_euler_state(project_initial_fluid(cfg.initial, Grid(cfg.euler_grid, 1)), cfg.kernel);
  const double m0 = es.fluid.mass();
  const double q0 = es.fluid.momentum()[0];
  double e = es.fluid.kinetic_energy(), worst_euler_rise = -1e300;
  const double e0 = e;
  for (int n = 0; n < 1000; ++n) {
    es = euler_step(std::move(es), cfg.euler_dt);
    const double e1 = es.fluid.kinetic_energy();
    worst_euler_rise = std::max(worst_euler_rise, (e1 - e) / (cfg.euler_dt * cfg.euler_dt * e0));
    e = e1;
  }
  const double euler_drift = std::abs(es.fluid.momentum()[0] - q0);
  const double euler_mass = std::abs(es.fluid.mass() - m0);
  const bool pass = mass_exact && euler_mass <= 1e-13 && kin_drift <= 1e-9 && euler_drift <= 1e-7 &&
                    worst_rise <= 1.0 && worst_euler_rise <= 1.0;
  return {pass, fmt("momentum drift over 1000 steps: kinetic %.2e (<= 1e-9), Euler %.2e (<= 1e-7); Euler mass %.1e", kin_drift,
                    euler_drift, euler_mass) +
                    fmt("; max energy rise per step / (dt^2 E0): kinetic %.2e, Euler %.2e (<= 1)", worst_rise, worst_euler_rise)};
}

}  // namespace

int main() {
  const SelftestReport self = run_metrics_selftest(0);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"flocking decay, psi = 1", [] { return decay("flocking_constant_kernel.toml"); }},
      {"flocking decay, psi_m = 0.8", [] { return decay("flocking_decaying_kernel.toml"); }},
      {"entropy inequality, eps = 0.1", entropy},
      {"hydrodynamic dissipation bounded by kinetic dissipation", dissipation_bound},
      {"W2^2 <= (d/8) L1 on smooth densities", [&] { return w2_l1_bound(self); }},
      {"optimal transport correctness", [&] { return ot(self); }},
      {"hydrodynamic limit epsilon sweep", sweep},
      {"mono-kinetic preservation", monokinetic},
      {"relative entropy and flux identities", identities},
      {"conservation suite", conservation},
  };
  int failures = 0;
  std::ofstream report(std::filesystem::path(KCS_SOURCE_DIR) / "acceptance_report.txt");
  auto emit = [&](const std::string& line) {
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    report << line << '\n';
  };
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o{false, ""};
    try {
      o = criteria[i].second();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    failures += o.pass ? 0 : 1;
    emit(std::string("[") + (o.pass ? "PASS" : "FAIL") + "] " + std::to_string(i + 1) + " " + criteria[i].first + ": " + o.detail);
  }
  emit(std::to_string(criteria.size() - failures) + " of " + std::to_string(criteria.size()) + " criteria passed");
  return failures == 0 ? 0 : 1;
}
