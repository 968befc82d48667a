#include <algorithm>
#include <cmath>

#include "kcs/diagnostics.hpp"
#include "kcs/rng.hpp"

namespace kcs {

double kinetic_entropy(const ParticleEnsemble& e) {
  double f = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    double v2 = 0.0;
    for (double v : e.velocity(i)) v2 += v * v;
    f += 0.5 * e.weights[i] * v2;
  }
  return f;
}

double dissipation_d1(const ParticleEnsemble& e, const MomentSet& m) {
  const int d = e.dim;
  double s = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const std::size_t c = m.grid.cell_of(e.position(i));
    double dev2 = 0.0;
    for (int k = 0; k < d; ++k) {
      const double dev = e.velocities[i * d + k] - m.u_eps[c * d + k];
      dev2 += dev * dev;
    }
    s += e.weights[i] * dev2;
  }
  return s;
}

double dissipation_d2(const ParticleEnsemble& e, const CommKernel& k, KernelSampling sampling, const Grid* grid,
                      std::size_t direct_cap) {
  const std::size_t n = e.size();
  if (n > direct_cap) throw DomainError("dissipation_d2: ensemble exceeds the direct-sum cap; use the sampled estimator");
  const int d = e.dim;
  std::vector<double> x(e.positions);
  if (sampling == KernelSampling::cell_center) {
    if (grid == nullptr) throw DomainError("dissipation_d2: cell_center sampling needs a grid");
    for (std::size_t i = 0; i < n; ++i) {
      const Vec c = grid->cell_center(grid->cell_of(e.position(i)));
      for (int a = 0; a < d; ++a) x[i * d + a] = c[a];
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::span<const double> xi(x.data() + i * d, d);
    double row = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      double dv2 = 0.0;
      for (int a = 0; a < d; ++a) {
        const double dv = e.velocities[i * d + a] - e.velocities[j * d + a];
        dv2 += dv * dv;
      }
      row += e.weights[j] * k.of_distance_sq(torus_distance_sq(xi, {x.data() + j * d, static_cast<std::size_t>(d)})) * dv2;
    }
    total += e.weights[i] * row;
  }
  return total;  // unordered pairs counted once: 1/2 * 2
}

SampledValue dissipation_d2_sampled(const ParticleEnsemble& e, const CommKernel& k, std::size_t pairs,
                                    std::uint64_t seed) {
  if (pairs < 2) throw DomainError("dissipation_d2_sampled: need at least two pairs");
  const std::size_t n = e.size();
  const int d = e.dim;
  const double scale = 0.5 * static_cast<double>(n) * static_cast<double>(n);
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t s = 0; s < pairs; ++s) {
    const auto i = static_cast<std::size_t>(rng::uniform(seed, s, 0) * n) % n;
    const auto j = static_cast<std::size_t>(rng::uniform(seed, s, 1) * n) % n;
    double dv2 = 0.0;
    for (int a = 0; a < d; ++a) {
      const double dv = e.velocities[i * d + a] - e.velocities[j * d + a];
      dv2 += dv * dv;
    }
    const double g = scale * e.weights[i] * e.weights[j] * k.of_distance_sq(torus_distance_sq(e.position(i), e.position(j))) * dv2;
    const double delta = g - mean;
    mean += delta / static_cast<double>(s + 1);
    m2 += delta * (g - mean);
  }
  const double var = m2 / static_cast<double>(pairs - 1);
  return {mean, std::sqrt(var / static_cast<double>(pairs))};
}

double dissipation_d2_cell(const MomentSet& m, const std::vector<double>& stress, const CellKernel& kernel) {
  const int d = m.grid.dim();
  const std::size_t cells = m.grid.cell_count();
  const double vol = m.grid.cell_volume();
  std::vector<double> mass(cells);
  for (std::size_t c = 0; c < cells; ++c) mass[c] = m.cell_mass(c);
  const auto psi_mass = kernel.convolve(mass, 1);
  double spread = 0.0;
  for (std::size_t c = 0; c < cells; ++c) {
    double tr = 0.0;
    for (int a = 0; a < d; ++a) tr += stress[(c * d + a) * d + a];
    spread += psi_mass[c] * tr * vol;
  }
  return hydrodynamic_alignment_dissipation(m, kernel) + spread;
}

double dissipation_d2_tilde(const MomentSet& m, const CommKernel& k) {
  return hydrodynamic_alignment_dissipation(m, CellKernel(m.grid, k));
}

FlockingFunctionals flocking_functionals(const ParticleEnsemble& e, const MomentSet& m) {
  FlockingFunctionals f;
  f.e1 = dissipation_d1(e, m);
  const int d = m.grid.dim();
  std::vector<std::size_t> live;
  for (std::size_t c = 0; c < m.occupied.size(); ++c)
    if (m.occupied[c]) live.push_back(c);
  double e2 = 0.0;
  for (std::size_t a = 0; a < live.size(); ++a) {
    double row = 0.0;
    for (std::size_t b = a + 1; b < live.size(); ++b) {
      double du2 = 0.0;
      for (int k = 0; k < d; ++k) {
        const double du = m.u_eps[live[a] * d + k] - m.u_eps[live[b] * d + k];
        du2 += du * du;
      }
      row += m.cell_mass(live[b]) * du2;
    }
    e2 += m.cell_mass(live[a]) * row;
  }
  f.e2 = 2.0 * e2;  // ordered pairs
  f.e = f.e1 + 0.5 * f.e2;
  return f;
}

void HydroPair::validate() const {
  if (!(u_eps.grid == u.grid)) throw DomainError("HydroPair: kinetic and Euler grids differ");
  if (u_eps.rho_eps.size() != u.rho.size()) throw DomainError("HydroPair: field sizes differ");
}

double relative_entropy_density(double q, std::span<const double> w, std::span<const double> u) {
  double s = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) s += (w[k] - u[k]) * (w[k] - u[k]);
  return 0.5 * q * s;
}

double relative_entropy_total(const HydroPair& p) {
  p.validate();
  const int d = p.u.grid.dim();
  const auto dd = static_cast<std::size_t>(d);
  double s = 0.0;
  for (std::size_t c = 0; c < p.u.rho.size(); ++c) {
    if (!p.u_eps.occupied[c]) continue;
    s += relative_entropy_density(p.u_eps.rho_eps[c], {p.u_eps.u_eps.data() + c * d, dd}, {p.u.u.data() + c * d, dd});
  }
  return s * p.u.grid.cell_volume();
}

std::vector<double> relative_flux(const HydroPair& p) {
  p.validate();
  const int d = p.u.grid.dim();
  std::vector<double> a(p.u.rho.size() * d * d, 0.0);
  for (std::size_t c = 0; c < p.u.rho.size(); ++c) {
    if (!p.u_eps.occupied[c]) continue;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        a[(c * d + i) * d + j] = p.u_eps.rho_eps[c] * (p.u_eps.u_eps[c * d + i] - p.u.u[c * d + i]) *
                                 (p.u_eps.u_eps[c * d + j] - p.u.u[c * d + j]);
  }
  return a;
}

void EntropyLedger::start(double t, double f_total) {
  rows.clear();
  rows.push_back({t, f_total, 0.0, 0.0, 0.0});
}

void EntropyLedger::record(double t, double f_total, const StepDissipation& rates, double dt) {
  if (rows.empty()) throw DomainError("EntropyLedger: record before start");
  const LedgerRow& last = rows.back();
  rows.push_back({t, f_total, last.cum_d1 + rates.d1 * dt, last.cum_d2_tilde + rates.d2_tilde * dt,
                  last.cum_d2 + rates.d2 * dt});
}

std::vector<double> entropy_inequality_margins(const EntropyLedger& l, double epsilon) {
  if (l.rows.empty()) throw DomainError("entropy_inequality_margin: empty ledger");
  const double f0 = l.rows.front().f_total;
  const double inv_eps = std::isfinite(epsilon) ? 1.0 / epsilon : 0.0;
  std::vector<double> out;
  out.reserve(l.rows.size());
  for (const LedgerRow& r : l.rows) out.push_back(f0 - (r.f_total + inv_eps * r.cum_d1 + r.cum_d2_tilde));
  return out;
}

double entropy_inequality_margin(const EntropyLedger& l, double epsilon) {
  return entropy_inequality_margins(l, epsilon).back();
}

}  // namespace kcs
