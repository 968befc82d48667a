// Particle solver for the kinetic Cucker-Smale equation with strong local
// alignment, plus the microscopic N-body system used for cross-validation.
#pragma once

#include <cstdint>
#include <vector>

#include "kcs/domain.hpp"

namespace kcs {

/// Cell-binned hydrodynamic moments of an ensemble. All fields are densities
/// (per unit volume); u_eps is zero on unoccupied cells.
struct MomentSet {
  Grid grid;
  std::vector<double> rho_eps;
  std::vector<double> momentum;  // (cell, axis)
  std::vector<double> u_eps;     // (cell, axis)
  std::vector<double> energy;    // sum w |v|^2 / 2 per unit volume
  std::vector<std::uint8_t> occupied;

  double cell_mass(std::size_t c) const { return rho_eps[c] * grid.cell_volume(); }
  double total_mass() const;
};

/// Cellwise (psi * rho)(x) and (psi * rho u)(x), so L[f](x, v) = psi_mom - v psi_rho.
struct ConvolvedFields {
  std::vector<double> psi_rho;
  std::vector<double> psi_mom;  // (cell, axis)
};

struct KineticRunState {
  ParticleEnsemble ensemble;
  double time = 0.0;
  /// Local-alignment scale; +infinity disables the relaxation term.
  double epsilon = 1.0;
  CommKernel kernel;
  Grid grid;
  int threads = 1;
  CellKernel::Path convolution = CellKernel::Path::direct;
};

/// Dissipation rates seen by one kinetic_step, sampled at the substep midpoints.
struct StepDissipation {
  double d1 = 0.0;        // local alignment, at the midpoint of the relaxation substep
  double d2_tilde = 0.0;  // hydrodynamic nonlocal dissipation, trapezoid over the alignment substep
  double d2 = 0.0;        // kinetic nonlocal dissipation (cell-center kernel), same quadrature
};

MomentSet local_moments(const ParticleEnsemble& e, const Grid& g, int threads = 1);

ConvolvedFields alignment_field(const MomentSet& m, const CommKernel& k,
                                CellKernel::Path path = CellKernel::Path::direct);

/// v <- u_cell + (v - u_cell) exp(-dt/epsilon) for particles in occupied cells.
ParticleEnsemble relaxation_substep(ParticleEnsemble e, const MomentSet& m, double dt, double epsilon,
                                    int threads = 1);

/// Strang step: half transport, nonlocal alignment, local relaxation, half transport.
/// Throws DomainError for dt <= 0.
KineticRunState kinetic_step(KineticRunState s, double dt, StepDissipation* dissipation = nullptr);

/// 1/2 sum_{c,c'} psi(c,c') m_c m_c' |u_c - u_c'|^2 over occupied cells.
double hydrodynamic_alignment_dissipation(const MomentSet& m, const CellKernel& kernel);

/// Per-cell stress tensor density P = sum_{i in cell} w_i (v_i - u)(v_i - u)^T / volume,
/// row-major (cell, d, d).
std::vector<double> stress_tensor(const ParticleEnsemble& e, const MomentSet& m);

/// Microscopic Cucker-Smale system with equal masses 1/N.
struct MicroState {
  int dim = 1;
  std::vector<double> positions;
  std::vector<double> velocities;

  std::size_t size() const { return positions.size() / static_cast<std::size_t>(dim); }
};

/// dv_i/dt = (1/N) sum_j psi(x_j - x_i)(v_j - v_i) evaluated at the given state.
std::vector<double> microscopic_acceleration(const MicroState& s, const CommKernel& k);

/// One classical RK4 step of the microscopic system.
MicroState microscopic_cs_step(const MicroState& s, const CommKernel& k, double dt);

}  // namespace kcs
