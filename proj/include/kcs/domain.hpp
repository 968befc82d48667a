// Geometry of the unit flat torus, communication kernels, particle ensembles,
// grids and the well-prepared initial data shared by every solver.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace kcs {

inline constexpr int kMaxDim = 2;

/// Fixed-capacity d-vector; components past the active dimension stay zero.
using Vec = std::array<double, kMaxDim>;

class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

void require_dimension(int dim);

/// Reduces x into [0, 1).
double wrap_unit(double x);

/// Signed displacement b - a on the circle, in [-1/2, 1/2).
double circle_displacement(double a, double b);

struct TorusPoint {
  Vec coords{};
  int dim = 1;

  TorusPoint() = default;
  /// Coordinates are wrapped into [0,1); the dimension is the list length.
  TorusPoint(std::initializer_list<double> xs);
  TorusPoint(std::span<const double> xs);
};

double torus_distance_sq(std::span<const double> a, std::span<const double> b);
double torus_distance(const TorusPoint& a, const TorusPoint& b);

/// psi(r) = lambda / (1 + r^2)^beta, evaluated at geodesic torus distance.
class CommKernel {
 public:
  CommKernel() = default;
  CommKernel(double lambda, double beta);

  double lambda() const { return lambda_; }
  double beta() const { return beta_; }

  double of_distance_sq(double r2) const;
  double of_distance(double r) const { return of_distance_sq(r * r); }
  bool is_constant() const { return beta_ == 0.0; }

 private:
  double lambda_ = 1.0;
  double beta_ = 0.0;
};

double kernel_eval(const CommKernel& k, const TorusPoint& a, const TorusPoint& b);

/// Minimum of psi over the torus: psi at the diameter sqrt(d)/2.
double kernel_min(const CommKernel& k, int dim);

/// sup |psi'(r)| over r in [0, sqrt(d)/2].
double kernel_lipschitz(const CommKernel& k, int dim);

class Grid {
 public:
  Grid() = default;
  Grid(int cells_per_axis, int dim);

  int cells_per_axis() const { return cells_; }
  int dim() const { return dim_; }
  double cell_width() const { return 1.0 / cells_; }
  double cell_volume() const;
  std::size_t cell_count() const;

  /// Flat index (i + G*j) of the cell containing x; x must lie in [0,1)^d.
  std::size_t cell_of(std::span<const double> x) const;
  Vec cell_center(std::size_t cell) const;
  std::array<int, kMaxDim> cell_coords(std::size_t cell) const;
  std::size_t cell_index(std::array<int, kMaxDim> coords) const;  // periodic

  bool operator==(const Grid&) const = default;

 private:
  int cells_ = 2;
  int dim_ = 1;
};

/// Weighted particles on T^d x R^d; arrays are row-major (particle, axis).
struct ParticleEnsemble {
  int dim = 1;
  std::vector<double> positions;
  std::vector<double> velocities;
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
  std::span<const double> position(std::size_t i) const {
    return {positions.data() + i * dim, static_cast<std::size_t>(dim)};
  }
  std::span<const double> velocity(std::size_t i) const {
    return {velocities.data() + i * dim, static_cast<std::size_t>(dim)};
  }
  double total_mass() const;
  Vec total_momentum() const;
  /// Throws DomainError unless array lengths agree and weights are positive and sum to 1.
  void validate(double mass_tol = 1e-12) const;
};

/// Grid fields (rho, u) of a pressureless fluid; u is row-major (cell, axis).
struct FluidState {
  Grid grid;
  std::vector<double> rho;
  std::vector<double> u;

  double mass() const;
  Vec momentum() const;
  double kinetic_energy() const;
};

struct FourierMode {
  std::array<int, kMaxDim> wavenumber{};
  double cos_amp = 0.0;
  double sin_amp = 0.0;
};

/// mean + sum_k [a_k cos(2 pi k.x) + b_k sin(2 pi k.x)]
struct FourierProfile {
  double mean = 0.0;
  std::vector<FourierMode> modes;

  double operator()(std::span<const double> x) const;
  /// Analytic partial derivative along `axis`.
  double derivative(std::span<const double> x, int axis) const;
};

struct InitialDataSpec {
  int dim = 1;
  FourierProfile rho0{1.0, {}};
  std::array<FourierProfile, kMaxDim> u0{};
  double epsilon = 0.1;
  /// Per-axis Gaussian variance of the velocity spread; defaults to epsilon.
  std::optional<double> thermal_variance;
  std::size_t particle_count = 1000;
  std::uint64_t seed = 0;

  double velocity_variance() const { return thermal_variance.value_or(epsilon); }
  /// rho0 divided by its mean, so that it integrates to one.
  FourierProfile normalized_density() const;
  Vec velocity_at(std::span<const double> x) const;
  /// Throws DomainError on any violated invariant (including min rho0 <= 0).
  void validate() const;
};

/// Samples the well-prepared ensemble: stratified positions ~ rho0, velocities
/// u0(x) + N(0, variance) per axis, weights 1/N. Deterministic in `seed`.
ParticleEnsemble build_initial_ensemble(const InitialDataSpec& spec);

/// Cell averages of rho0 and of rho0*u0 (u = average momentum / average density).
FluidState project_initial_fluid(const InitialDataSpec& spec, const Grid& grid);

/// Precomputed psi between cell centers, indexed by periodic cell offset.
class CellKernel {
 public:
  enum class Path { direct, fft };

  CellKernel(const Grid& grid, const CommKernel& kernel);

  const Grid& grid() const { return grid_; }
  double operator()(std::size_t a, std::size_t b) const;
  double max_value() const;

  /// out[c] = sum_c' psi(c, c') field[c'] for `components` interleaved fields.
  std::vector<double> convolve(std::span<const double> field, int components,
                               Path path = Path::direct) const;

 private:
  std::vector<double> convolve_fft(std::span<const double> field, int components) const;

  Grid grid_;
  std::vector<double> table_;  // psi by offset (di + G*dj)
};

}  // namespace kcs
