// Experiment drivers. Each report knows how to serialize itself into an
// output directory (CSV series plus summary.json) and whether it passed.
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kcs/diagnostics.hpp"
#include "kcs/harness/config.hpp"
#include "kcs/harness/io.hpp"

namespace kcs::harness {

/// Resolution and seed fields echoed into every summary.json.
nlohmann::json config_summary(const ExperimentConfig& cfg);

/// Block average of (rho, rho u) onto a coarser grid whose size divides the source.
FluidState restrict_fluid(const FluidState& f, const Grid& coarse);

/// Sample times: multiples of sample_every * kinetic_dt up to the horizon, plus fit_time and the horizon.
std::vector<double> sample_times(const ExperimentConfig& cfg);

struct PairedRow {
  double t = 0.0;
  double relative_entropy = 0.0;
  double w2 = 0.0;
  double q = 0.0;  // int rho_eps |u_eps - u|^2 + W2^2
  double l1 = 0.0;
  double e1 = 0.0;
  double kinetic_entropy = 0.0;
  double entropy_margin = 0.0;
  double lipschitz = 0.0;
};

struct PairedRun {
  double epsilon = 0.0;
  PairedTrajectory trajectory;
  std::vector<PairedRow> rows;
  bool breached = false;
  double usable_horizon = 0.0;
  std::string breach_message;
  double runtime_seconds = 0.0;

  CsvTable table() const;
  /// Per-cell kinetic moments at every kept sample: t, cell, rho, u components, trace P.
  CsvTable snapshots() const;
};

struct PairedOptions {
  /// Overrides the initial thermal variance (0 gives exactly mono-kinetic data).
  std::optional<double> thermal_variance;
  bool keep_samples = true;
};

/// Kinetic run at `epsilon` and Euler run from the projected initial data, sampled together.
PairedRun run_paired(const ExperimentConfig& cfg, double epsilon, const PairedOptions& options = {});

struct SweepRow {
  double epsilon = 0.0;
  double t = 0.0;
  double relative_entropy = 0.0;
  double w2_squared = 0.0;
  double q = 0.0;
  double runtime_seconds = 0.0;
};

struct SweepReport {
  std::vector<SweepRow> rows;  // one per epsilon at fit_time, epsilon descending
  std::vector<PairedRun> runs;
  PairedRun floor_run;    // epsilon_min, thermal variance 0: grid/time-step floor
  PairedRun refined_run;  // epsilon_min, kSweepRefineFactor x particles: sampling floor
  double fit_time = 0.0;
  double slope = 0.0;
  double slope_standard_error = 0.0;
  double discretization_floor_q = 0.0;
  double sampling_floor_q = 0.0;  // (Q(N) - Q(4N)) * 4/3, i.e. assuming Q - Q* ~ 1/N
  double floor_q = 0.0;           // max of the two
  bool ratio_saturated = false;   // last consecutive ratio below (epsilon ratio)^(1/2)
  bool floor_dominated = false;   // Q(epsilon_min) <= 3 floor_q
  bool floor_limited = false;     // both of the above
  double gronwall_constant = 0.0;
  bool breached = false;
  bool pass = false;

  nlohmann::json to_json() const;
  void write(const std::filesystem::path& dir) const;
};

inline constexpr double kSweepSlopeThreshold = 0.8;
inline constexpr std::size_t kSweepRefineFactor = 4;

SweepReport run_epsilon_sweep(const ExperimentConfig& cfg);

struct DecayRow {
  double t = 0.0;
  double e1 = 0.0;
  double e2 = 0.0;
  double e = 0.0;
};

struct DecayReport {
  std::vector<DecayRow> rows;
  double fitted_rate = 0.0;
  double psi_min = 0.0;
  double theoretical_rate = 0.0;
  double worst_envelope_ratio = 0.0;  // max E(t) / (E(0) exp(-rate t))
  double max_identity_error = 0.0;    // max |E - E1 - E2/2|
  double epsilon = 0.0;
  ParticleEnsemble final_state;
  double final_time = 0.0;
  bool trivial = false;
  bool pass = false;

  nlohmann::json to_json() const;
  void write(const std::filesystem::path& dir) const;
};

/// write() also stores the final ensemble as final_state.kcs1.

/// Envelope tolerance: E(t) <= (1 + tol) E(0) exp(-rate t).
inline constexpr double kDecayEnvelopeTolerance = 0.05;
/// Fitted rate must reach this fraction of the theoretical rate.
inline constexpr double kDecayRateFraction = 0.9;

DecayReport run_flocking_decay(const ExperimentConfig& cfg);

struct MonokineticRow {
  double t = 0.0;
  double e1 = 0.0;
  double bound = 0.0;
  double gronwall = 0.0;  // max(E1(0), 1e-10) exp(2 (l - 1) t)
  double lipschitz = 0.0;
  double velocity_gap = 0.0;  // ||u_eps - u||_{L2(rho_eps)}
  double l1 = 0.0;
  double w2 = 0.0;
};

struct MonokineticReport {
  std::vector<MonokineticRow> rows;
  double lipschitz_max = 0.0;
  double cell_width = 0.0;
  double bound = 0.0;
  double max_e1 = 0.0;
  bool breached = false;
  double window = 0.0;
  bool pass = false;

  nlohmann::json to_json() const;
  void write(const std::filesystem::path& dir) const;
};

MonokineticReport run_monokinetic_check(const ExperimentConfig& cfg);

struct MeanfieldRow {
  double t = 0.0;
  Vec mean_kinetic{};
  Vec mean_micro{};
  double second_kinetic = 0.0;
  double second_micro = 0.0;
};

struct MeanfieldReport {
  std::vector<MeanfieldRow> rows;
  double max_mean_gap = 0.0;
  double max_second_gap = 0.0;
  double second_bound = 0.0;
  bool pass = false;

  nlohmann::json to_json() const;
  void write(const std::filesystem::path& dir) const;
};

MeanfieldReport run_meanfield_consistency(const ExperimentConfig& cfg);

struct AuditRun {
  PairedRun run;
  AuditReport report;

  nlohmann::json to_json() const;
  void write(const std::filesystem::path& dir) const;
};

/// Paired run at kinetic.epsilon followed by hypothesis_audit.
AuditRun run_audit(const ExperimentConfig& cfg);

struct EntropyCheck {
  EntropyLedger ledger;
  std::vector<double> margins;
  double min_margin = 0.0;
  double allowance = 0.0;  // 10 dt F(0)
  bool pass = false;
};

/// Kinetic-only run at kinetic.epsilon recording the entropy ledger every step.
EntropyCheck run_entropy_check(const ExperimentConfig& cfg);

struct SelftestReport {
  std::size_t circle_pairs = 0;
  double max_circle_lp_gap = 0.0;
  double max_marginal_error = 0.0;
  std::size_t w1_violations = 0;
  std::size_t density_pairs = 0;
  double min_bound_margin = 0.0;
  double bound_allowance = 0.0;
  bool pass = false;

  nlohmann::json to_json() const;
  void write(const std::filesystem::path& dir) const;
};

/// Random checks of the transport metrics: circle method vs LP oracle, plan
/// marginals, W1 <= W2, and the W2^2 <= (d/8) L1 bound on smooth densities.
SelftestReport run_metrics_selftest(std::uint64_t seed, std::size_t atomic_pairs = 200, std::size_t density_pairs = 100,
                                    int grid = 256);

/// Least-squares slope of y on x with its standard error.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double standard_error = 0.0;
};
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace kcs::harness
