// Entropy, dissipation and flocking functionals, relative entropy between a
// kinetic run and an Euler run, and the hypothesis audit along a paired run.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kcs/domain.hpp"
#include "kcs/euler.hpp"
#include "kcs/kinetic.hpp"

namespace kcs {

/// sum_i w_i |v_i|^2 / 2
double kinetic_entropy(const ParticleEnsemble& e);

/// sum_i w_i |u_eps(cell(x_i)) - v_i|^2
double dissipation_d1(const ParticleEnsemble& e, const MomentSet& m);

/// Where psi is evaluated inside the particle double sum.
enum class KernelSampling { particle, cell_center };

/// 1/2 sum_{i,j} w_i w_j psi(x_i - x_j) |v_i - v_j|^2 by direct double sum.
/// cell_center replaces x_i by the center of its cell on `grid`.
/// Throws DomainError when N exceeds `direct_cap`.
double dissipation_d2(const ParticleEnsemble& e, const CommKernel& k,
                      KernelSampling sampling = KernelSampling::particle, const Grid* grid = nullptr,
                      std::size_t direct_cap = 5000);

struct SampledValue {
  double value = 0.0;
  double standard_error = 0.0;
};

/// Monte-Carlo estimate of dissipation_d2 (particle kernel) from `pairs` uniform index pairs.
SampledValue dissipation_d2_sampled(const ParticleEnsemble& e, const CommKernel& k, std::size_t pairs,
                                    std::uint64_t seed);

/// Cell-center kernel D2 from moments: D2_tilde + sum_c (psi * mass)_c V_c, with
/// V_c = cell volume * trace(stress_c). Equals the cell_center double sum.
double dissipation_d2_cell(const MomentSet& m, const std::vector<double>& stress, const CellKernel& kernel);

/// 1/2 sum_{c,c'} psi(c - c') m_c m_c' |u_c - u_c'|^2 over occupied cells.
double dissipation_d2_tilde(const MomentSet& m, const CommKernel& k);

struct FlockingFunctionals {
  double e1 = 0.0;
  double e2 = 0.0;
  double e = 0.0;
};

/// E1 = D1, E2 = sum_{c,c'} m_c m_c' |u_c - u_c'|^2, E = E1 + E2/2.
FlockingFunctionals flocking_functionals(const ParticleEnsemble& e, const MomentSet& m);

/// Kinetic moments and an Euler state on the same grid at the same time.
struct HydroPair {
  MomentSet u_eps;
  FluidState u;
  double time = 0.0;

  /// Throws DomainError on grid mismatch.
  void validate() const;
};

/// q |w - u|^2 / 2 for a cell with kinetic density q, kinetic velocity w, reference velocity u.
double relative_entropy_density(double q, std::span<const double> w, std::span<const double> u);

/// sum over occupied cells of rho_eps |u_eps - u|^2 / 2 * volume.
double relative_entropy_total(const HydroPair& p);

/// rho_eps (u_eps - u) (x) (u_eps - u) per cell, row-major (cell, d, d); zero on vacuum cells.
std::vector<double> relative_flux(const HydroPair& p);

struct LedgerRow {
  double t = 0.0;
  double f_total = 0.0;
  double cum_d1 = 0.0;
  double cum_d2_tilde = 0.0;
  double cum_d2 = 0.0;
};

struct EntropyLedger {
  std::vector<LedgerRow> rows;

  void start(double t, double f_total);
  /// Appends the state after a step of length dt with the given dissipation rates.
  void record(double t, double f_total, const StepDissipation& rates, double dt);
};

/// F(0) - [F(t) + cum_d1 / epsilon + cum_d2_tilde] at the last row.
double entropy_inequality_margin(const EntropyLedger& l, double epsilon);
/// Same quantity at every row.
std::vector<double> entropy_inequality_margins(const EntropyLedger& l, double epsilon);

/// One time level of a paired kinetic / Euler run.
struct PairedSample {
  double time = 0.0;
  MomentSet moments;
  std::vector<double> stress;  // stress_tensor of the ensemble
  double kinetic_entropy = 0.0;
  FluidState fluid;
};

struct PairedTrajectory {
  double epsilon = 1.0;
  CommKernel kernel;
  std::vector<PairedSample> samples;
  EntropyLedger ledger;
};

struct AuditOptions {
  double h2_constant = 1.0;
  double energy_bound = 10.0;
  /// Pass tolerance; negative means 0.05 (F(0) + 1).
  double tolerance = -1.0;
};

struct AuditEntry {
  std::string name;
  double margin = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  bool surrogate = false;
  nlohmann::json details;
};

struct AuditReport {
  std::vector<AuditEntry> entries;
  double tolerance = 0.0;
  bool all_pass = false;

  nlohmann::json to_json() const;
  const AuditEntry& at(const std::string& name) const;
};

/// The pieces of the nonlocal term of the relative entropy identity at one time level.
struct KDecomposition {
  double lhs = 0.0;  // -int [D^2 eta(U) F(U)(U_eps - U) + D eta(U) F(U_eps)]
  double k1 = 0.0;
  double k2 = 0.0;
  double k3 = 0.0;
};

KDecomposition k_decomposition(const HydroPair& p, const CellKernel& kernel);

/// Signed margins for each structural hypothesis along the trajectory.
/// Throws DomainError on an empty or unpaired trajectory.
AuditReport hypothesis_audit(const PairedTrajectory& run, const AuditOptions& options = {});

}  // namespace kcs
