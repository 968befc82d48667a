#include "kcs/domain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "kcs/rng.hpp"

namespace kcs {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Gauss-Legendre nodes/weights on [0,1], 4 points.
constexpr std::array<double, 4> kGaussNodes = {0.0694318442029737, 0.3300094782075719,
                                               0.6699905217924281, 0.9305681557970263};
constexpr std::array<double, 4> kGaussWeights = {0.1739274225687269, 0.3260725774312731,
                                                 0.3260725774312731, 0.1739274225687269};

}  // namespace

void require_dimension(int dim) {
  if (dim < 1 || dim > kMaxDim) throw DomainError("dimension must be 1 or 2");
}

double wrap_unit(double x) {
  double y = x - std::floor(x);
  // floor can leave y == 1.0 for tiny negative x.
  return y >= 1.0 ? 0.0 : y;
}

double circle_displacement(double a, double b) {
  double d = b - a;
  d -= std::floor(d + 0.5);
  return d;
}

TorusPoint::TorusPoint(std::initializer_list<double> xs)
    : TorusPoint(std::span<const double>(xs.begin(), xs.size())) {}

TorusPoint::TorusPoint(std::span<const double> xs) : dim(static_cast<int>(xs.size())) {
  require_dimension(dim);
  for (int k = 0; k < dim; ++k) coords[k] = wrap_unit(xs[k]);
}

double torus_distance_sq(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DomainError("torus_distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = circle_displacement(a[k], b[k]);
    s += d * d;
  }
  return s;
}

double torus_distance(const TorusPoint& a, const TorusPoint& b) {
  if (a.dim != b.dim) throw DomainError("torus_distance: dimension mismatch");
  return std::sqrt(torus_distance_sq({a.coords.data(), static_cast<std::size_t>(a.dim)},
                                     {b.coords.data(), static_cast<std::size_t>(b.dim)}));
}

CommKernel::CommKernel(double lambda, double beta) : lambda_(lambda), beta_(beta) {
  if (!(lambda > 0.0)) throw DomainError("kernel lambda must be positive");
  if (!(beta >= 0.0)) throw DomainError("kernel beta must be nonnegative");
}

double CommKernel::of_distance_sq(double r2) const {
  if (beta_ == 0.0) return lambda_;
  if (beta_ == 1.0) return lambda_ / (1.0 + r2);
  return lambda_ * std::pow(1.0 + r2, -beta_);
}

double kernel_eval(const CommKernel& k, const TorusPoint& a, const TorusPoint& b) {
  const double r = torus_distance(a, b);
  return k.of_distance_sq(r * r);
}

double kernel_min(const CommKernel& k, int dim) {
  require_dimension(dim);
  return k.of_distance_sq(dim / 4.0);
}

double kernel_lipschitz(const CommKernel& k, int dim) {
  require_dimension(dim);
  if (k.beta() == 0.0) return 0.0;
  const double r_max = std::sqrt(static_cast<double>(dim)) / 2.0;
  const double r = std::min(std::sqrt(1.0 / (2.0 * k.beta() + 1.0)), r_max);
  return 2.0 * k.beta() * k.lambda() * r * std::pow(1.0 + r * r, -k.beta() - 1.0);
}

Grid::Grid(int cells_per_axis, int dim) : cells_(cells_per_axis), dim_(dim) {
  require_dimension(dim);
  if (cells_per_axis < 2) throw DomainError("grid needs at least 2 cells per axis");
}

double Grid::cell_volume() const { return std::pow(cell_width(), dim_); }

std::size_t Grid::cell_count() const {
  return dim_ == 1 ? static_cast<std::size_t>(cells_)
                   : static_cast<std::size_t>(cells_) * static_cast<std::size_t>(cells_);
}

std::size_t Grid::cell_of(std::span<const double> x) const {
  std::size_t idx = 0;
  std::size_t stride = 1;
  for (int k = 0; k < dim_; ++k) {
    auto i = static_cast<std::size_t>(x[k] * cells_);
    if (i >= static_cast<std::size_t>(cells_)) i = cells_ - 1;
    idx += i * stride;
    stride *= cells_;
  }
  return idx;
}

std::array<int, kMaxDim> Grid::cell_coords(std::size_t cell) const {
  std::array<int, kMaxDim> c{};
  c[0] = static_cast<int>(cell % cells_);
  if (dim_ == 2) c[1] = static_cast<int>(cell / cells_);
  return c;
}

std::size_t Grid::cell_index(std::array<int, kMaxDim> coords) const {
  auto wrap = [this](int i) { return static_cast<std::size_t>(((i % cells_) + cells_) % cells_); };
  return dim_ == 1 ? wrap(coords[0]) : wrap(coords[0]) + wrap(coords[1]) * cells_;
}

Vec Grid::cell_center(std::size_t cell) const {
  const auto c = cell_coords(cell);
  Vec x{};
  for (int k = 0; k < dim_; ++k) x[k] = (c[k] + 0.5) * cell_width();
  return x;
}

double ParticleEnsemble::total_mass() const {
  return std::accumulate(weights.begin(), weights.end(), 0.0);
}

Vec ParticleEnsemble::total_momentum() const {
  Vec p{};
  for (std::size_t i = 0; i < size(); ++i)
    for (int k = 0; k < dim; ++k) p[k] += weights[i] * velocities[i * dim + k];
  return p;
}

void ParticleEnsemble::validate(double mass_tol) const {
  require_dimension(dim);
  if (weights.empty()) throw DomainError("ensemble is empty");
  if (positions.size() != weights.size() * dim || velocities.size() != weights.size() * dim)
    throw DomainError("ensemble arrays have inconsistent lengths");
  for (double w : weights)
    if (!(w > 0.0)) throw DomainError("ensemble weights must be positive");
  for (double x : positions)
    if (!(x >= 0.0 && x < 1.0)) throw DomainError("ensemble position outside [0,1)");
  if (std::abs(total_mass() - 1.0) > mass_tol) throw DomainError("ensemble weights must sum to 1");
}

double FluidState::mass() const {
  return std::accumulate(rho.begin(), rho.end(), 0.0) * grid.cell_volume();
}

Vec FluidState::momentum() const {
  Vec p{};
  const int d = grid.dim();
  for (std::size_t c = 0; c < rho.size(); ++c)
    for (int k = 0; k < d; ++k) p[k] += rho[c] * u[c * d + k];
  for (int k = 0; k < d; ++k) p[k] *= grid.cell_volume();
  return p;
}

double FluidState::kinetic_energy() const {
  double e = 0.0;
  const int d = grid.dim();
  for (std::size_t c = 0; c < rho.size(); ++c)
    for (int k = 0; k < d; ++k) e += 0.5 * rho[c] * u[c * d + k] * u[c * d + k];
  return e * grid.cell_volume();
}

double FourierProfile::operator()(std::span<const double> x) const {
  double value = mean;
  for (const auto& m : modes) {
    double phase = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) phase += m.wavenumber[k] * x[k];
    phase *= kTwoPi;
    value += m.cos_amp * std::cos(phase) + m.sin_amp * std::sin(phase);
  }
  return value;
}

double FourierProfile::derivative(std::span<const double> x, int axis) const {
  double value = 0.0;
  for (const auto& m : modes) {
    double phase = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) phase += m.wavenumber[k] * x[k];
    phase *= kTwoPi;
    const double dphase = kTwoPi * m.wavenumber[axis];
    value += dphase * (-m.cos_amp * std::sin(phase) + m.sin_amp * std::cos(phase));
  }
  return value;
}

FourierProfile InitialDataSpec::normalized_density() const {
  FourierProfile p = rho0;
  p.mean = 1.0;
  for (auto& m : p.modes) {
    m.cos_amp /= rho0.mean;
    m.sin_amp /= rho0.mean;
  }
  return p;
}

Vec InitialDataSpec::velocity_at(std::span<const double> x) const {
  Vec v{};
  for (int k = 0; k < dim; ++k) v[k] = u0[k](x);
  return v;
}

void InitialDataSpec::validate() const {
  require_dimension(dim);
  if (particle_count == 0) throw DomainError("particle_count must be positive");
  if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");
  if (!(velocity_variance() >= 0.0) || std::isinf(velocity_variance()))
    throw DomainError("thermal variance must be finite and nonnegative");
  for (const auto& m : rho0.modes) {
    if (m.wavenumber[0] == 0 && m.wavenumber[1] == 0)
      throw DomainError("rho0 modes must have nonzero wavenumber");
  }
  if (!(rho0.mean > 0.0)) throw DomainError("rho0 is not normalizable (mean <= 0)");
  // min rho0 > 0, checked on a sampling lattice
  const int n = dim == 1 ? 4096 : 256;
  std::array<double, kMaxDim> x{};
  const std::size_t total = dim == 1 ? n : static_cast<std::size_t>(n) * n;
  for (std::size_t idx = 0; idx < total; ++idx) {
    x[0] = (static_cast<double>(idx % n) + 0.5) / n;
    if (dim == 2) x[1] = (static_cast<double>(idx / n) + 0.5) / n;
    if (!(rho0({x.data(), static_cast<std::size_t>(dim)}) > 0.0))
      throw DomainError("rho0 must be strictly positive on the torus");
  }
}

namespace {

// Inverse of a piecewise-linear CDF tabulated at bin edges k/K.
double invert_cdf(const std::vector<double>& cdf, double u) {
  const std::size_t bins = cdf.size() - 1;
  const double target = u * cdf.back();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
  std::size_t k = it == cdf.begin() ? 0 : static_cast<std::size_t>(it - cdf.begin()) - 1;
  if (k >= bins) k = bins - 1;
  const double width = cdf[k + 1] - cdf[k];
  const double frac = width > 0.0 ? (target - cdf[k]) / width : 0.5;
  return wrap_unit((static_cast<double>(k) + std::clamp(frac, 0.0, 1.0)) / static_cast<double>(bins));
}

}  // namespace

ParticleEnsemble build_initial_ensemble(const InitialDataSpec& spec) {
  spec.validate();
  const int d = spec.dim;
  const std::size_t n = spec.particle_count;
  const FourierProfile density = spec.normalized_density();
  const double sigma = std::sqrt(spec.velocity_variance());

  ParticleEnsemble e;
  e.dim = d;
  e.positions.resize(n * d);
  e.velocities.resize(n * d);
  e.weights.assign(n, 1.0 / static_cast<double>(n));

  // Stream layout per particle: 0 = stratum jitter, 1 = conditional axis,
  // 2.. = Gaussian velocity components.
  if (d == 1) {
    constexpr int kBins = 4096;
    std::vector<double> cdf(kBins + 1, 0.0);
    for (int k = 0; k < kBins; ++k) {
      const double x = (k + 0.5) / kBins;
      cdf[k + 1] = cdf[k] + density({&x, 1}) / kBins;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double u = (static_cast<double>(i) + rng::uniform(spec.seed, i, 0)) / static_cast<double>(n);
      e.positions[i] = invert_cdf(cdf, u);
    }
  } else {
    constexpr int kBins = 256;
    std::vector<double> marginal(kBins + 1, 0.0);
    std::vector<std::vector<double>> conditional(kBins, std::vector<double>(kBins + 1, 0.0));
    for (int i = 0; i < kBins; ++i) {
      for (int j = 0; j < kBins; ++j) {
        const std::array<double, 2> x = {(i + 0.5) / kBins, (j + 0.5) / kBins};
        const double mass = density(x) / (kBins * kBins);
        conditional[i][j + 1] = conditional[i][j] + mass;
      }
      marginal[i + 1] = marginal[i] + conditional[i][kBins];
    }
    for (std::size_t p = 0; p < n; ++p) {
      const double u = (static_cast<double>(p) + rng::uniform(spec.seed, p, 0)) / static_cast<double>(n);
      const double x = invert_cdf(marginal, u);
      const int row = std::min(static_cast<int>(x * kBins), kBins - 1);
      e.positions[p * 2] = x;
      e.positions[p * 2 + 1] = invert_cdf(conditional[row], rng::uniform(spec.seed, p, 1));
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    const Vec mean = spec.velocity_at(e.position(i));
    for (int k = 0; k < d; ++k) {
      const double z = sigma > 0.0 ? rng::normal(spec.seed, i, 1 + static_cast<std::uint64_t>(k)) : 0.0;
      e.velocities[i * d + k] = mean[k] + sigma * z;
    }
  }
  return e;
}

FluidState project_initial_fluid(const InitialDataSpec& spec, const Grid& grid) {
  spec.validate();
  if (grid.dim() != spec.dim) throw DomainError("grid and initial data dimensions differ");
  const int d = spec.dim;
  const FourierProfile density = spec.normalized_density();
  const double h = grid.cell_width();

  FluidState f;
  f.grid = grid;
  f.rho.assign(grid.cell_count(), 0.0);
  f.u.assign(grid.cell_count() * d, 0.0);
  const int qy = d == 2 ? 4 : 1;
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    const auto ij = grid.cell_coords(c);
    double mass = 0.0;
    Vec mom{};
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < qy; ++b) {
        std::array<double, kMaxDim> x = {(ij[0] + kGaussNodes[a]) * h, 0.0};
        double w = kGaussWeights[a];
        if (d == 2) {
          x[1] = (ij[1] + kGaussNodes[b]) * h;
          w *= kGaussWeights[b];
        }
        const std::span<const double> xs(x.data(), static_cast<std::size_t>(d));
        const double r = density(xs);
        mass += w * r;
        const Vec v = spec.velocity_at(xs);
        for (int k = 0; k < d; ++k) mom[k] += w * r * v[k];
      }
    }
    f.rho[c] = mass;
    for (int k = 0; k < d; ++k) f.u[c * d + k] = mom[k] / mass;
  }
  const double total = f.mass();
  for (double& r : f.rho) r /= total;
  return f;
}

}  // namespace kcs
