// Wasserstein and L1 distances between atomic measures and grid densities on the torus.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kcs/domain.hpp"

namespace kcs {

struct AtomicMeasure {
  int dim = 1;
  std::vector<double> positions;  // (atom, axis), each in [0,1)
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
  std::span<const double> position(std::size_t i) const {
    return {positions.data() + i * dim, static_cast<std::size_t>(dim)};
  }
  /// Throws DomainError unless weights are positive and sum to 1 within `tol`.
  void validate(double tol = 1e-12) const;
};

struct CouplingPlan {
  struct Entry {
    std::size_t source;
    std::size_t target;
    double mass;
  };
  std::vector<Entry> entries;

  /// Largest absolute row or column sum violation against the two marginals.
  double marginal_error(const AtomicMeasure& mu1, const AtomicMeasure& mu2) const;
};

struct TransportSolution {
  double cost = 0.0;      // optimal sum of mass * ground cost
  double distance = 0.0;  // cost^(1/p)
  CouplingPlan plan;
};

inline constexpr std::size_t kOracleCellCap = 4096;

double l1_distance(const Grid& g, std::span<const double> r1, std::span<const double> r2);
double l1_distance(const FluidState& a, const FluidState& b);

/// Exact W2 on the unit circle (quantile coupling minimized over the cyclic shift).
double w2_circle(const AtomicMeasure& mu1, const AtomicMeasure& mu2);

/// Transportation-simplex solution with squared geodesic cost; W2 in `distance`.
/// Throws DomainError when n1 * n2 exceeds kOracleCellCap.
TransportSolution w2_discrete_oracle(const AtomicMeasure& mu1, const AtomicMeasure& mu2);

/// Same LP with geodesic cost.
double w1_discrete(const AtomicMeasure& mu1, const AtomicMeasure& mu2);
TransportSolution w1_discrete_solution(const AtomicMeasure& mu1, const AtomicMeasure& mu2);

/// Atoms at the centers of cells with positive density, weights = normalized cell mass.
AtomicMeasure atomize(const Grid& g, std::span<const double> density);

/// Block-sums a 2D density onto at most `max_atoms` atoms at block centers.
AtomicMeasure atomize_coarse(const Grid& g, std::span<const double> density, std::size_t max_atoms);

/// W2 between cell-center atomizations: exact circle method in 1D,
/// LP on coarsened supports (at most 64 atoms each) in 2D.
double w2_grid(const Grid& g, std::span<const double> r1, std::span<const double> r2);
double w2_grid(const FluidState& a, const FluidState& b);

/// (d/8) * l1_distance - w2_grid^2.
double w2_l1_bound_margin(const Grid& g, std::span<const double> r1, std::span<const double> r2);

}  // namespace kcs
