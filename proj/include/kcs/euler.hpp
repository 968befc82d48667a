// Pressureless Euler system with nonlocal alignment on the torus, and the
// characteristic flow of its velocity field.
#pragma once

#include <stdexcept>
#include <vector>

#include "kcs/domain.hpp"

namespace kcs {

/// Raised when lipschitz_estimate * dt reaches the safeguard: the run has
/// left the smooth regime the scheme is built for.
class SafeguardBreach : public std::runtime_error {
 public:
  SafeguardBreach(double time, double lipschitz, double dt, double threshold);
  double time;
  double lipschitz;
};

struct EulerRunState {
  FluidState fluid;
  double time = 0.0;
  CommKernel kernel;
  double lipschitz_estimate = 0.0;
  double safeguard = 0.5;
  long step_count = 0;
  int threads = 1;
  CellKernel::Path convolution = CellKernel::Path::direct;
};

/// Fresh run state with lipschitz_estimate filled in.
EulerRunState make_euler_state(FluidState fluid, const CommKernel& kernel);

/// S(x) = rho(x) sum_y psi(x - y) rho(y) (u(y) - u(x)) cell_volume, row-major (cell, axis).
std::vector<double> alignment_source(const FluidState& f, const CommKernel& k,
                                     CellKernel::Path path = CellKernel::Path::direct);

/// One step: conservative semi-Lagrangian remap of (rho, rho u) along RK2
/// backtraced cell faces (dimensionally split in 2D), then the alignment
/// source on rho u by Heun's method. Throws SafeguardBreach if
/// lipschitz_estimate * dt >= safeguard and DomainError if dt <= 0.
EulerRunState euler_step(EulerRunState s, double dt);

/// max over cells, axes and components of the centered difference of u.
double lipschitz_monitor(const FluidState& f);

/// Centered-difference velocity gradient, row-major (cell, component, axis).
std::vector<double> velocity_gradient(const FluidState& f);

/// Periodic d-linear interpolation of the cell-centered velocity.
Vec interpolate_velocity(const FluidState& f, std::span<const double> x);

struct CharacteristicMap {
  Grid grid;
  std::vector<double> X;  // (cell, axis), wrapped into [0,1)
};

/// X(0, x) = x at every cell center of `grid`.
CharacteristicMap make_characteristics(const Grid& grid);

/// Ẋ = u(t, X). Midpoint rule in the frozen field `f`, or Heun's method
/// between `f` and `next` when the later time level is supplied.
CharacteristicMap advance_characteristics(const CharacteristicMap& c, const FluidState& f, double dt,
                                          const FluidState* next = nullptr);

/// Cloud-in-cell deposit of the cell masses rho0 * volume carried by X onto `target`,
/// returned as a density.
std::vector<double> pushforward_density(const CharacteristicMap& c, std::span<const double> rho0,
                                        const Grid& target);

}  // namespace kcs
