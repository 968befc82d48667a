#include "kcs/harness/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "kcs/parallel.hpp"
#include "kcs/rng.hpp"
#include "kcs/transport.hpp"

namespace kcs::harness {

namespace {

constexpr double kFloorFactor = 3.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

bool before(double t, double target) { return t < target - 1e-12 * std::max(1.0, std::abs(target)); }

KineticRunState make_kinetic(const ExperimentConfig& cfg, const InitialDataSpec& spec, double epsilon, int threads) {
  KineticRunState s;
  s.ensemble = build_initial_ensemble(spec);
  s.epsilon = epsilon;
  s.kernel = cfg.kernel;
  s.grid = Grid(cfg.kinetic_grid, spec.dim);
  s.threads = threads;
  s.convolution = cfg.convolution;
  return s;
}

EulerRunState make_euler(const ExperimentConfig& cfg, const InitialDataSpec& spec, int threads) {
  EulerRunState s = make_euler_state(project_initial_fluid(spec, Grid(cfg.euler_grid, spec.dim)), cfg.kernel);
  s.safeguard = cfg.safeguard;
  s.threads = threads;
  s.convolution = cfg.convolution;
  return s;
}

void advance_kinetic(KineticRunState& s, double target, double dt, EntropyLedger* ledger) {
  while (before(s.time, target)) {
    const double step = std::min(dt, target - s.time);
    StepDissipation rates;
    s = kinetic_step(std::move(s), step, &rates);
    if (ledger) ledger->record(s.time, kinetic_entropy(s.ensemble), rates, step);
  }
}

void advance_euler(EulerRunState& s, double target, double dt) {
  while (before(s.time, target)) s = euler_step(std::move(s), std::min(dt, target - s.time));
}

double log_growth_constant(const std::vector<PairedRow>& rows) {
  if (rows.empty() || !(rows.front().q > 0.0)) return 0.0;
  double c = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double t = rows[i].t - rows.front().t;
    if (t > 0.0 && rows[i].q > 0.0) c = std::max(c, std::log(rows[i].q / rows.front().q) / t);
  }
  return c;
}

const PairedRow* row_at(const std::vector<PairedRow>& rows, double t) {
  for (const auto& r : rows)
    if (std::abs(r.t - t) <= 1e-9 * std::max(1.0, t)) return &r;
  return nullptr;
}

}  // namespace

nlohmann::json config_summary(const ExperimentConfig& cfg) {
  return {{"name", cfg.name},
          {"dimension", cfg.initial.dim},
          {"kernel_lambda", cfg.kernel.lambda()},
          {"kernel_beta", cfg.kernel.beta()},
          {"particles", cfg.initial.particle_count},
          {"kinetic_grid", cfg.kinetic_grid},
          {"kinetic_dt", cfg.kinetic_dt},
          {"euler_grid", cfg.euler_grid},
          {"euler_dt", cfg.euler_dt},
          {"horizon", cfg.horizon},
          {"seed", cfg.seed},
          {"threads", cfg.threads},
          {"note", "horizons, resolutions and epsilon grids are artifact choices"}};
}

FluidState restrict_fluid(const FluidState& f, const Grid& coarse) {
  if (f.grid.dim() != coarse.dim()) throw DomainError("restrict_fluid: dimension mismatch");
  const int fine_n = f.grid.cells_per_axis();
  const int coarse_n = coarse.cells_per_axis();
  if (fine_n % coarse_n != 0) throw DomainError("restrict_fluid: coarse grid must divide the fine grid");
  if (fine_n == coarse_n) return f;
  const int ratio = fine_n / coarse_n;
  const int d = coarse.dim();
  const double w = f.grid.cell_volume() / coarse.cell_volume();
  FluidState out{coarse, std::vector<double>(coarse.cell_count(), 0.0), std::vector<double>(coarse.cell_count() * d, 0.0)};
  std::vector<double> mom(coarse.cell_count() * d, 0.0);
  for (std::size_t c = 0; c < f.grid.cell_count(); ++c) {
    const auto cc = f.grid.cell_coords(c);
    std::array<int, kMaxDim> bc{};
    for (int k = 0; k < d; ++k) bc[k] = cc[k] / ratio;
    const std::size_t target = coarse.cell_index(bc);
    out.rho[target] += w * f.rho[c];
    for (int k = 0; k < d; ++k) mom[target * d + k] += w * f.rho[c] * f.u[c * d + k];
  }
  for (std::size_t c = 0; c < coarse.cell_count(); ++c)
    if (out.rho[c] > 0.0)
      for (int k = 0; k < d; ++k) out.u[c * d + k] = mom[c * d + k] / out.rho[c];
  return out;
}

std::vector<double> sample_times(const ExperimentConfig& cfg) {
  const double interval = cfg.sample_every * cfg.kinetic_dt;
  std::vector<double> t;
  for (long k = 0;; ++k) {
    const double s = k * interval;
    if (s > cfg.horizon + 1e-12) break;
    t.push_back(s);
  }
  if (cfg.fit_time > 0.0 && cfg.fit_time <= cfg.horizon) t.push_back(cfg.fit_time);
  t.push_back(cfg.horizon);
  std::sort(t.begin(), t.end());
  std::vector<double> out;
  for (double s : t)
    if (out.empty() || s - out.back() > 1e-9 * std::max(1.0, s)) out.push_back(s);
  return out;
}

CsvTable PairedRun::table() const {
  CsvTable t({"t", "epsilon", "relative_entropy", "w2", "q", "l1_density_gap", "e1", "kinetic_entropy",
              "entropy_margin", "lipschitz"});
  for (const auto& r : rows)
    t.add_row({r.t, epsilon, r.relative_entropy, r.w2, r.q, r.l1, r.e1, r.kinetic_entropy, r.entropy_margin, r.lipschitz});
  return t;
}

CsvTable PairedRun::snapshots() const {
  const int d = trajectory.samples.empty() ? 1 : trajectory.samples.front().moments.grid.dim();
  std::vector<std::string> header{"t", "cell", "rho_eps", "u_eps_x"};
  if (d == 2) header.push_back("u_eps_y");
  header.push_back("trace_stress");
  CsvTable t(header);
  for (const auto& s : trajectory.samples) {
    const MomentSet& m = s.moments;
    for (std::size_t c = 0; c < m.grid.cell_count(); ++c) {
      std::vector<CsvTable::Cell> row{s.time, static_cast<long long>(c), m.rho_eps[c]};
      double trace = 0.0;
      for (int k = 0; k < d; ++k) {
        row.push_back(m.u_eps[c * d + k]);
        trace += s.stress[(c * d + k) * d + k];
      }
      row.push_back(trace);
      t.add_row(std::move(row));
    }
  }
  return t;
}

PairedRun run_paired(const ExperimentConfig& cfg, double epsilon, const PairedOptions& options) {
  const auto start = Clock::now();
  if (cfg.euler_grid % cfg.kinetic_grid != 0)
    throw ConfigError("paired runs need euler.grid to be a multiple of kinetic.grid");
  InitialDataSpec spec = cfg.initial;
  spec.epsilon = epsilon;
  if (options.thermal_variance) spec.thermal_variance = *options.thermal_variance;

  PairedRun run;
  run.epsilon = epsilon;
  run.trajectory.epsilon = epsilon;
  run.trajectory.kernel = cfg.kernel;
  KineticRunState ks = make_kinetic(cfg, spec, epsilon, cfg.threads);
  EulerRunState es = make_euler(cfg, spec, cfg.threads);
  run.trajectory.ledger.start(0.0, kinetic_entropy(ks.ensemble));

  for (double t : sample_times(cfg)) {
    advance_kinetic(ks, t, cfg.kinetic_dt, &run.trajectory.ledger);
    try {
      advance_euler(es, t, cfg.euler_dt);
    } catch (const SafeguardBreach& b) {
      run.breached = true;
      run.breach_message = b.what();
      break;
    }
    PairedSample s;
    s.time = t;
    s.moments = local_moments(ks.ensemble, ks.grid, cfg.threads);
    s.stress = stress_tensor(ks.ensemble, s.moments);
    s.kinetic_entropy = kinetic_entropy(ks.ensemble);
    s.fluid = restrict_fluid(es.fluid, ks.grid);

    const HydroPair pair{s.moments, s.fluid, t};
    PairedRow row;
    row.t = t;
    row.relative_entropy = relative_entropy_total(pair);
    row.w2 = w2_grid(ks.grid, s.moments.rho_eps, s.fluid.rho);
    row.q = 2.0 * row.relative_entropy + row.w2 * row.w2;
    row.l1 = l1_distance(ks.grid, s.moments.rho_eps, s.fluid.rho);
    row.e1 = dissipation_d1(ks.ensemble, s.moments);
    row.kinetic_entropy = s.kinetic_entropy;
    row.entropy_margin = entropy_inequality_margin(run.trajectory.ledger, epsilon);
    row.lipschitz = lipschitz_monitor(es.fluid);
    run.rows.push_back(row);
    run.usable_horizon = t;
    if (options.keep_samples) run.trajectory.samples.push_back(std::move(s));
  }
  run.runtime_seconds = seconds_since(start);
  return run;
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw DomainError("fit_line: need at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw DomainError("fit_line: abscissae are identical");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (n > 2) {
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - (f.intercept + f.slope * x[i]);
      ssr += r * r;
    }
    f.standard_error = std::sqrt(ssr / static_cast<double>(n - 2) / sxx);
  }
  return f;
}

SweepReport run_epsilon_sweep(const ExperimentConfig& cfg) {
  if (cfg.epsilons.size() < 3) throw ConfigError("epsilon sweep needs at least three epsilon values for a slope fit");
  if (!(cfg.fit_time > 0.0 && cfg.fit_time <= cfg.horizon)) throw ConfigError("experiment.fit_time must lie in (0, horizon]");
  SweepReport rep;
  rep.fit_time = cfg.fit_time;
  const std::size_t n = cfg.epsilons.size();
  rep.runs.resize(n);

  // Independent epsilon runs; results land in fixed epsilon order.
  const int outer = std::max(1, std::min<int>(cfg.threads, static_cast<int>(n)));
  ExperimentConfig inner = cfg;
  inner.threads = std::max(1, cfg.threads / outer);
  parallel_chunks(n, outer, [&](std::size_t begin, std::size_t end, int) {
    for (std::size_t i = begin; i < end; ++i) rep.runs[i] = run_paired(inner, cfg.epsilons[i]);
  });
  rep.floor_run = run_paired(cfg, cfg.epsilons.back(), {0.0, true});
  ExperimentConfig refined = cfg;
  refined.initial.particle_count *= kSweepRefineFactor;
  rep.refined_run = run_paired(refined, cfg.epsilons.back());

  std::vector<double> lx, ly;
  bool positive = true;
  for (const auto& run : rep.runs) {
    rep.breached = rep.breached || run.breached;
    rep.gronwall_constant = std::max(rep.gronwall_constant, log_growth_constant(run.rows));
    const PairedRow* r = row_at(run.rows, cfg.fit_time);
    if (!r) continue;
    rep.rows.push_back({run.epsilon, r->t, r->relative_entropy, r->w2 * r->w2, r->q, run.runtime_seconds});
    if (r->q > 0.0) {
      lx.push_back(std::log(run.epsilon));
      ly.push_back(std::log(r->q));
    } else {
      positive = false;
    }
  }
  if (const PairedRow* f = row_at(rep.floor_run.rows, cfg.fit_time)) rep.discretization_floor_q = f->q;

  const bool complete = !rep.breached && positive && rep.rows.size() == n;
  if (complete) {
    const LinearFit fit = fit_line(lx, ly);
    rep.slope = fit.slope;
    rep.slope_standard_error = fit.standard_error;
    const double q_min = rep.rows.back().q;
    const double q_prev = rep.rows[n - 2].q;
    const double eps_ratio = rep.rows[n - 2].epsilon / rep.rows.back().epsilon;
    if (const PairedRow* r = row_at(rep.refined_run.rows, cfg.fit_time)) {
      const double k = static_cast<double>(kSweepRefineFactor);
      rep.sampling_floor_q = std::max(0.0, (q_min - r->q) * k / (k - 1.0));
    }
    rep.floor_q = std::max(rep.discretization_floor_q, rep.sampling_floor_q);
    rep.ratio_saturated = q_prev / q_min < std::sqrt(eps_ratio);
    rep.floor_dominated = q_min <= kFloorFactor * rep.floor_q;
    rep.floor_limited = rep.ratio_saturated && rep.floor_dominated;
  }
  rep.pass = complete && (rep.slope >= kSweepSlopeThreshold || rep.floor_limited);
  return rep;
}

nlohmann::json SweepReport::to_json() const {
  nlohmann::json j;
  j["experiment"] = "sweep-epsilon";
  j["fit_time"] = fit_time;
  j["slope"] = slope;
  j["slope_standard_error"] = slope_standard_error;
  j["slope_band"] = {slope - 2.0 * slope_standard_error, slope + 2.0 * slope_standard_error};
  j["slope_threshold"] = kSweepSlopeThreshold;
  j["discretization_floor_q"] = discretization_floor_q;
  j["sampling_floor_q"] = sampling_floor_q;
  j["refined_particles_factor"] = kSweepRefineFactor;
  j["floor_q"] = floor_q;
  j["ratio_saturated"] = ratio_saturated;
  j["floor_dominated"] = floor_dominated;
  j["floor_limited"] = floor_limited;
  j["gronwall_constant"] = gronwall_constant;
  j["safeguard_breach"] = breached;
  for (const auto& r : runs)
    if (r.breached) j["breaches"].push_back({{"epsilon", r.epsilon}, {"usable_horizon", r.usable_horizon}, {"message", r.breach_message}});
  for (const auto& r : rows)
    j["rows"].push_back({{"epsilon", r.epsilon}, {"t", r.t}, {"relative_entropy", r.relative_entropy},
                         {"w2_squared", r.w2_squared}, {"q", r.q}, {"runtime_seconds", r.runtime_seconds}});
  j["pass"] = pass;
  return j;
}

void SweepReport::write(const std::filesystem::path& dir) const {
  CsvTable t({"epsilon", "t", "relative_entropy", "w2_squared", "q", "runtime_seconds"});
  for (const auto& r : rows) t.add_row({r.epsilon, r.t, r.relative_entropy, r.w2_squared, r.q, r.runtime_seconds});
  t.write(dir / "sweep.csv");
  for (const auto& run : runs) run.table().write(dir / ("series_eps_" + format_double(run.epsilon) + ".csv"));
  floor_run.table().write(dir / "series_floor_control.csv");
  refined_run.table().write(dir / "series_refined_control.csv");
  write_json(dir / "summary.json", to_json());
}

DecayReport run_flocking_decay(const ExperimentConfig& cfg) {
  DecayReport rep;
  rep.epsilon = cfg.initial.epsilon;
  rep.psi_min = kernel_min(cfg.kernel, cfg.initial.dim);
  rep.theoretical_rate = 2.0 * std::min(1.0, rep.psi_min);
  KineticRunState ks = make_kinetic(cfg, cfg.initial, cfg.initial.epsilon, cfg.threads);
  for (double t : sample_times(cfg)) {
    advance_kinetic(ks, t, cfg.kinetic_dt, nullptr);
    const MomentSet m = local_moments(ks.ensemble, ks.grid, cfg.threads);
    const FlockingFunctionals f = flocking_functionals(ks.ensemble, m);
    rep.rows.push_back({t, f.e1, f.e2, f.e});
    rep.max_identity_error = std::max(rep.max_identity_error, std::abs(f.e - (f.e1 + 0.5 * f.e2)));
  }
  rep.final_time = ks.time;
  rep.final_state = std::move(ks.ensemble);
  const double e0 = rep.rows.front().e;
  if (!(e0 > 0.0)) {
    rep.trivial = true;
    rep.pass = true;
    return rep;
  }
  std::vector<double> tx, ly;
  for (const auto& r : rep.rows) {
    rep.worst_envelope_ratio = std::max(rep.worst_envelope_ratio, r.e / (e0 * std::exp(-rep.theoretical_rate * r.t)));
    if (r.e >= 1e-10 * e0 && r.e > 0.0) {
      tx.push_back(r.t);
      ly.push_back(std::log(r.e));
    }
  }
  rep.fitted_rate = tx.size() >= 2 ? -fit_line(tx, ly).slope : 0.0;
  rep.pass = rep.worst_envelope_ratio <= 1.0 + kDecayEnvelopeTolerance &&
             rep.fitted_rate >= kDecayRateFraction * rep.theoretical_rate && rep.max_identity_error <= 1e-12;
  return rep;
}

nlohmann::json DecayReport::to_json() const {
  return {{"experiment", "flocking-decay"},
          {"epsilon", epsilon},
          {"psi_min", psi_min},
          {"theoretical_rate", theoretical_rate},
          {"fitted_rate", fitted_rate},
          {"required_rate", kDecayRateFraction * theoretical_rate},
          {"worst_envelope_ratio", worst_envelope_ratio},
          {"envelope_limit", 1.0 + kDecayEnvelopeTolerance},
          {"max_identity_error", max_identity_error},
          {"trivial", trivial},
          {"pass", pass}};
}

void DecayReport::write(const std::filesystem::path& dir) const {
  CsvTable t({"t", "e1", "e2", "e"});
  for (const auto& r : rows) t.add_row({r.t, r.e1, r.e2, r.e});
  t.write(dir / "decay.csv");
  save_checkpoint(dir / "final_state.kcs1", {final_time, final_state});
  write_json(dir / "summary.json", to_json());
}

MonokineticReport run_monokinetic_check(const ExperimentConfig& cfg) {
  MonokineticReport rep;
  const PairedRun run = run_paired(cfg, cfg.initial.epsilon, {0.0, false});
  rep.breached = run.breached;
  rep.window = run.usable_horizon;
  rep.cell_width = 1.0 / cfg.kinetic_grid;
  for (const auto& r : run.rows) rep.lipschitz_max = std::max(rep.lipschitz_max, r.lipschitz);
  rep.bound = 10.0 * rep.cell_width * rep.cell_width * rep.lipschitz_max * rep.lipschitz_max;
  const double e1_0 = run.rows.empty() ? 0.0 : run.rows.front().e1;
  double lip_running = 0.0;
  bool ok = !run.rows.empty();
  for (const auto& r : run.rows) {
    lip_running = std::max(lip_running, r.lipschitz);
    MonokineticRow row;
    row.t = r.t;
    row.e1 = r.e1;
    row.bound = rep.bound;
    row.gronwall = std::max(e1_0, 1e-10) * std::exp(2.0 * (lip_running - 1.0) * r.t);
    row.lipschitz = r.lipschitz;
    row.velocity_gap = std::sqrt(2.0 * r.relative_entropy);
    row.l1 = r.l1;
    row.w2 = r.w2;
    rep.rows.push_back(row);
    rep.max_e1 = std::max(rep.max_e1, r.e1);
    ok = ok && r.e1 <= rep.bound;
  }
  rep.pass = ok;
  return rep;
}

nlohmann::json MonokineticReport::to_json() const {
  return {{"experiment", "monokinetic"},
          {"cell_width", cell_width},
          {"lipschitz_max", lipschitz_max},
          {"e1_bound", bound},
          {"max_e1", max_e1},
          {"checked_window", window},
          {"safeguard_breach", breached},
          {"pass", pass}};
}

void MonokineticReport::write(const std::filesystem::path& dir) const {
  CsvTable t({"t", "e1", "e1_bound", "gronwall_form", "lipschitz", "velocity_gap_l2", "l1_density_gap", "w2"});
  for (const auto& r : rows) t.add_row({r.t, r.e1, r.bound, r.gronwall, r.lipschitz, r.velocity_gap, r.l1, r.w2});
  t.write(dir / "monokinetic.csv");
  write_json(dir / "summary.json", to_json());
}

MeanfieldReport run_meanfield_consistency(const ExperimentConfig& cfg) {
  MeanfieldReport rep;
  InitialDataSpec spec = cfg.initial;
  spec.particle_count = cfg.meanfield_particles;
  const double inf = std::numeric_limits<double>::infinity();
  KineticRunState ks = make_kinetic(cfg, spec, inf, 1);
  const int d = spec.dim;
  MicroState micro{d, ks.ensemble.positions, ks.ensemble.velocities};
  const double n = static_cast<double>(micro.size());
  const double h = 1.0 / cfg.kinetic_grid;
  rep.second_bound = 5.0 * (cfg.kinetic_dt * cfg.kinetic_dt + h);

  auto record = [&](double t) {
    MeanfieldRow row;
    row.t = t;
    row.mean_kinetic = ks.ensemble.total_momentum();
    for (std::size_t i = 0; i < micro.size(); ++i)
      for (int k = 0; k < d; ++k) {
        const double v = micro.velocities[i * d + k];
        row.mean_micro[k] += v / n;
        row.second_micro += v * v / n;
      }
    row.second_kinetic = 2.0 * kinetic_entropy(ks.ensemble);
    for (int k = 0; k < d; ++k) rep.max_mean_gap = std::max(rep.max_mean_gap, std::abs(row.mean_kinetic[k] - row.mean_micro[k]));
    rep.max_second_gap = std::max(rep.max_second_gap, std::abs(row.second_kinetic - row.second_micro));
    rep.rows.push_back(row);
  };

  record(0.0);
  const long steps = std::lround(cfg.horizon / cfg.kinetic_dt);
  for (long s = 1; s <= steps; ++s) {
    ks = kinetic_step(std::move(ks), cfg.kinetic_dt);
    micro = microscopic_cs_step(micro, cfg.kernel, cfg.kinetic_dt);
    if (s % cfg.sample_every == 0 || s == steps) record(s * cfg.kinetic_dt);
  }
  rep.pass = rep.max_mean_gap <= 1e-10 && rep.max_second_gap <= rep.second_bound;
  return rep;
}

nlohmann::json MeanfieldReport::to_json() const {
  return {{"experiment", "meanfield"},
          {"max_mean_velocity_gap", max_mean_gap},
          {"mean_velocity_tolerance", 1e-10},
          {"max_second_moment_gap", max_second_gap},
          {"second_moment_bound", second_bound},
          {"pass", pass}};
}

void MeanfieldReport::write(const std::filesystem::path& dir) const {
  CsvTable t({"t", "mean_kinetic_x", "mean_kinetic_y", "mean_micro_x", "mean_micro_y", "second_kinetic", "second_micro"});
  for (const auto& r : rows)
    t.add_row({r.t, r.mean_kinetic[0], r.mean_kinetic[1], r.mean_micro[0], r.mean_micro[1], r.second_kinetic, r.second_micro});
  t.write(dir / "meanfield.csv");
  write_json(dir / "summary.json", to_json());
}

AuditRun run_audit(const ExperimentConfig& cfg) {
  AuditRun a;
  a.run = run_paired(cfg, cfg.initial.epsilon);
  if (a.run.trajectory.samples.empty()) throw DomainError("audit: paired run produced no samples");
  AuditOptions opt;
  opt.h2_constant = cfg.h2_constant;
  opt.energy_bound = cfg.energy_bound;
  a.report = hypothesis_audit(a.run.trajectory, opt);
  return a;
}

nlohmann::json AuditRun::to_json() const {
  nlohmann::json j = report.to_json();
  j["experiment"] = "audit";
  j["epsilon"] = run.epsilon;
  j["safeguard_breach"] = run.breached;
  j["checked_window"] = run.usable_horizon;
  j["pass"] = report.all_pass && !run.breached;
  return j;
}

void AuditRun::write(const std::filesystem::path& dir) const {
  run.table().write(dir / "paired_series.csv");
  run.snapshots().write(dir / "snapshots.csv");
  CsvTable t({"hypothesis", "margin", "tolerance", "pass", "bounded_surrogate"});
  for (const auto& e : report.entries)
    t.add_row({e.name, e.margin, e.tolerance, static_cast<long long>(e.pass), static_cast<long long>(e.surrogate)});
  t.write(dir / "audit.csv");
  write_json(dir / "audit.json", report.to_json());
  write_json(dir / "summary.json", to_json());
}

EntropyCheck run_entropy_check(const ExperimentConfig& cfg) {
  EntropyCheck out;
  KineticRunState ks = make_kinetic(cfg, cfg.initial, cfg.initial.epsilon, cfg.threads);
  out.ledger.start(0.0, kinetic_entropy(ks.ensemble));
  advance_kinetic(ks, cfg.horizon, cfg.kinetic_dt, &out.ledger);
  out.margins = entropy_inequality_margins(out.ledger, cfg.initial.epsilon);
  out.min_margin = *std::min_element(out.margins.begin(), out.margins.end());
  out.allowance = 10.0 * cfg.kinetic_dt * out.ledger.rows.front().f_total;
  out.pass = out.min_margin >= -out.allowance;
  return out;
}

namespace {

AtomicMeasure random_atoms(std::uint64_t seed, std::uint64_t index, std::size_t n) {
  AtomicMeasure mu;
  mu.dim = 1;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mu.positions.push_back(rng::uniform(seed, index * 64 + i, 11));
    const double w = 0.05 + rng::uniform(seed, index * 64 + i, 12);
    mu.weights.push_back(w);
    total += w;
  }
  for (double& w : mu.weights) w /= total;
  return mu;
}

std::vector<double> random_smooth_density(const Grid& g, std::uint64_t seed, std::uint64_t index) {
  FourierProfile p;
  p.mean = 1.0;
  for (int k = 1; k <= 4; ++k) {
    FourierMode m;
    m.wavenumber = {k, 0};
    m.cos_amp = (2.0 * rng::uniform(seed, index, 20 + 2 * k) - 1.0) * 0.2 / k;
    m.sin_amp = (2.0 * rng::uniform(seed, index, 21 + 2 * k) - 1.0) * 0.2 / k;
    p.modes.push_back(m);
  }
  std::vector<double> r(g.cell_count());
  double total = 0.0;
  for (std::size_t c = 0; c < r.size(); ++c) {
    const Vec x = g.cell_center(c);
    r[c] = p(std::span<const double>(x.data(), 1));
    total += r[c] * g.cell_volume();
  }
  for (double& v : r) v /= total;
  return r;
}

}  // namespace

SelftestReport run_metrics_selftest(std::uint64_t seed, std::size_t atomic_pairs, std::size_t density_pairs, int grid) {
  SelftestReport rep;
  rep.circle_pairs = atomic_pairs;
  for (std::size_t p = 0; p < atomic_pairs; ++p) {
    const std::size_t n1 = 1 + static_cast<std::size_t>(rng::uniform(seed, p, 1) * 8);
    const std::size_t n2 = 1 + static_cast<std::size_t>(rng::uniform(seed, p, 2) * 8);
    const AtomicMeasure a = random_atoms(seed, 2 * p, n1);
    const AtomicMeasure b = random_atoms(seed, 2 * p + 1, n2);
    const double circle = w2_circle(a, b);
    const TransportSolution lp = w2_discrete_oracle(a, b);
    const TransportSolution lp1 = w1_discrete_solution(a, b);
    rep.max_circle_lp_gap = std::max(rep.max_circle_lp_gap, std::abs(circle - lp.distance));
    rep.max_marginal_error = std::max({rep.max_marginal_error, lp.plan.marginal_error(a, b), lp1.plan.marginal_error(a, b)});
    if (lp1.distance > lp.distance + 1e-12) ++rep.w1_violations;
  }
  const Grid g(grid, 1);
  rep.density_pairs = density_pairs;
  rep.bound_allowance = 2.0 * g.cell_width();
  rep.min_bound_margin = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < density_pairs; ++p) {
    const auto r1 = random_smooth_density(g, seed, 1000 + 2 * p);
    const auto r2 = random_smooth_density(g, seed, 1001 + 2 * p);
    rep.min_bound_margin = std::min(rep.min_bound_margin, w2_l1_bound_margin(g, r1, r2));
  }
  rep.pass = rep.max_circle_lp_gap <= 1e-9 && rep.max_marginal_error <= 1e-12 && rep.w1_violations == 0 &&
             rep.min_bound_margin >= -rep.bound_allowance;
  return rep;
}

nlohmann::json SelftestReport::to_json() const {
  return {{"experiment", "metrics-selftest"},
          {"atomic_pairs", circle_pairs},
          {"max_circle_lp_gap", max_circle_lp_gap},
          {"max_marginal_error", max_marginal_error},
          {"w1_exceeds_w2", w1_violations},
          {"density_pairs", density_pairs},
          {"min_w2_l1_margin", min_bound_margin},
          {"margin_allowance", bound_allowance},
          {"pass", pass}};
}

void SelftestReport::write(const std::filesystem::path& dir) const {
  CsvTable t({"check", "value", "limit"});
  t.add_row({std::string("max_circle_lp_gap"), max_circle_lp_gap, 1e-9});
  t.add_row({std::string("max_marginal_error"), max_marginal_error, 1e-12});
  t.add_row({std::string("w1_exceeds_w2"), static_cast<double>(w1_violations), 0.0});
  t.add_row({std::string("min_w2_l1_margin"), min_bound_margin, -bound_allowance});
  t.write(dir / "selftest.csv");
  write_json(dir / "summary.json", to_json());
}

}  // namespace kcs::harness
