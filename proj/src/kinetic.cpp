#include "kcs/kinetic.hpp"

#include <cmath>
#include <numeric>

#include "kcs/parallel.hpp"

namespace kcs {

double MomentSet::total_mass() const {
  return std::accumulate(rho_eps.begin(), rho_eps.end(), 0.0) * grid.cell_volume();
}

MomentSet local_moments(const ParticleEnsemble& e, const Grid& g, int threads) {
  if (e.size() == 0) throw DomainError("local_moments: empty ensemble");
  if (e.dim != g.dim()) throw DomainError("local_moments: ensemble and grid dimensions differ");
  const int d = e.dim;
  const std::size_t cells = g.cell_count();
  const std::size_t stride = 2 + d;  // mass, momentum[d], energy

  // Per-chunk partial histograms, merged in chunk order.
  const int chunks = chunk_count(e.size(), threads);
  std::vector<std::vector<double>> partial(chunks, std::vector<double>(cells * stride, 0.0));
  parallel_chunks(e.size(), threads, [&](std::size_t begin, std::size_t end, int chunk) {
    auto& h = partial[chunk];
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t c = g.cell_of(e.position(i));
      const double w = e.weights[i];
      double* slot = h.data() + c * stride;
      slot[0] += w;
      double v2 = 0.0;
      for (int k = 0; k < d; ++k) {
        const double v = e.velocities[i * d + k];
        slot[1 + k] += w * v;
        v2 += v * v;
      }
      slot[1 + d] += 0.5 * w * v2;
    }
  });
  for (int c = 1; c < chunks; ++c)
    for (std::size_t j = 0; j < partial[0].size(); ++j) partial[0][j] += partial[c][j];
  const auto& sums = partial[0];

  MomentSet m;
  m.grid = g;
  m.rho_eps.assign(cells, 0.0);
  m.momentum.assign(cells * d, 0.0);
  m.u_eps.assign(cells * d, 0.0);
  m.energy.assign(cells, 0.0);
  m.occupied.assign(cells, 0);
  const double inv_vol = 1.0 / g.cell_volume();
  for (std::size_t c = 0; c < cells; ++c) {
    const double* slot = sums.data() + c * stride;
    if (slot[0] <= 0.0) continue;
    m.occupied[c] = 1;
    m.rho_eps[c] = slot[0] * inv_vol;
    m.energy[c] = slot[1 + d] * inv_vol;
    for (int k = 0; k < d; ++k) {
      m.momentum[c * d + k] = slot[1 + k] * inv_vol;
      m.u_eps[c * d + k] = slot[1 + k] / slot[0];
    }
  }
  return m;
}

namespace {

std::vector<double> cell_masses(const MomentSet& m) {
  std::vector<double> mass(m.rho_eps.size());
  for (std::size_t c = 0; c < mass.size(); ++c) mass[c] = m.cell_mass(c);
  return mass;
}

std::vector<double> mass_weighted(const std::vector<double>& mass, const std::vector<double>& u, int d) {
  std::vector<double> out(u.size());
  for (std::size_t c = 0; c < mass.size(); ++c)
    for (int k = 0; k < d; ++k) out[c * d + k] = mass[c] * u[c * d + k];
  return out;
}

void transport(ParticleEnsemble& e, double dt, int threads) {
  parallel_chunks(e.positions.size(), threads, [&](std::size_t begin, std::size_t end, int) {
    for (std::size_t j = begin; j < end; ++j) e.positions[j] = wrap_unit(e.positions[j] + dt * e.velocities[j]);
  });
}

}  // namespace

ConvolvedFields alignment_field(const MomentSet& m, const CommKernel& k, CellKernel::Path path) {
  const CellKernel table(m.grid, k);
  const int d = m.grid.dim();
  const auto mass = cell_masses(m);
  ConvolvedFields f;
  f.psi_rho = table.convolve(mass, 1, path);
  f.psi_mom = table.convolve(mass_weighted(mass, m.u_eps, d), d, path);
  return f;
}

ParticleEnsemble relaxation_substep(ParticleEnsemble e, const MomentSet& m, double dt, double epsilon,
                                    int threads) {
  if (!std::isfinite(epsilon)) return e;
  const int d = e.dim;
  const double decay = std::exp(-dt / epsilon);
  parallel_chunks(e.size(), threads, [&](std::size_t begin, std::size_t end, int) {
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t c = m.grid.cell_of(e.position(i));
      if (!m.occupied[c]) continue;
      for (int k = 0; k < d; ++k) {
        const double mean = m.u_eps[c * d + k];
        double& v = e.velocities[i * d + k];
        v = mean + (v - mean) * decay;
      }
    }
  });
  return e;
}

double hydrodynamic_alignment_dissipation(const MomentSet& m, const CellKernel& kernel) {
  const int d = m.grid.dim();
  std::vector<std::size_t> live;
  for (std::size_t c = 0; c < m.occupied.size(); ++c)
    if (m.occupied[c]) live.push_back(c);
  double total = 0.0;
  for (std::size_t a = 0; a < live.size(); ++a) {
    const std::size_t ca = live[a];
    double row = 0.0;
    for (std::size_t b = a + 1; b < live.size(); ++b) {
      const std::size_t cb = live[b];
      double du2 = 0.0;
      for (int k = 0; k < d; ++k) {
        const double du = m.u_eps[ca * d + k] - m.u_eps[cb * d + k];
        du2 += du * du;
      }
      row += kernel(ca, cb) * m.cell_mass(cb) * du2;
    }
    total += m.cell_mass(ca) * row;
  }
  // The loop visits each unordered pair once; 1/2 * 2 = 1.
  return total;
}

KineticRunState kinetic_step(KineticRunState s, double dt, StepDissipation* dissipation) {
  if (!(dt > 0.0)) throw DomainError("kinetic_step: dt must be positive");
  ParticleEnsemble& e = s.ensemble;
  const int d = e.dim;
  const Grid& g = s.grid;
  const std::size_t cells = g.cell_count();

  transport(e, 0.5 * dt, s.threads);

  // Nonlocal alignment at frozen positions. Within a cell every particle
  // feels the same field, so the deviation from the cell mean decays exactly
  // as exp(-psi_rho dt) while the cell means follow the conservative linear
  // system du_c/dt = sum_c' psi m_c' (u_c' - u_c), integrated with RK4.
  const MomentSet before = local_moments(e, g, s.threads);
  const CellKernel table(g, s.kernel);
  const auto mass = cell_masses(before);
  const auto psi_rho = table.convolve(mass, 1, s.convolution);
  auto rhs = [&](const std::vector<double>& u) {
    auto out = table.convolve(mass_weighted(mass, u, d), d, s.convolution);
    for (std::size_t c = 0; c < cells; ++c)
      for (int k = 0; k < d; ++k) out[c * d + k] -= psi_rho[c] * u[c * d + k];
    return out;
  };
  const std::vector<double>& u0 = before.u_eps;
  auto axpy = [](const std::vector<double>& x, double a, const std::vector<double>& y) {
    std::vector<double> r(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) r[j] = x[j] + a * y[j];
    return r;
  };
  const auto k1 = rhs(u0);
  const auto k2 = rhs(axpy(u0, 0.5 * dt, k1));
  const auto k3 = rhs(axpy(u0, 0.5 * dt, k2));
  const auto k4 = rhs(axpy(u0, dt, k3));
  std::vector<double> u1(u0.size());
  for (std::size_t j = 0; j < u0.size(); ++j) u1[j] = u0[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);

  std::vector<double> fluct_decay(cells);
  for (std::size_t c = 0; c < cells; ++c) fluct_decay[c] = std::exp(-psi_rho[c] * dt);

  // Fluctuation energy sum w |v - u_c|^2 per cell before the update, per chunk.
  const int chunks = chunk_count(e.size(), s.threads);
  std::vector<std::vector<double>> fluct(chunks, std::vector<double>(cells, 0.0));
  parallel_chunks(e.size(), s.threads, [&](std::size_t begin, std::size_t end, int chunk) {
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t c = g.cell_of(e.position(i));
      double dev2 = 0.0;
      for (int k = 0; k < d; ++k) {
        double& v = e.velocities[i * d + k];
        const double dev = v - u0[c * d + k];
        dev2 += dev * dev;
        v = u1[c * d + k] + dev * fluct_decay[c];
      }
      fluct[chunk][c] += e.weights[i] * dev2;
    }
  });
  for (int c = 1; c < chunks; ++c)
    for (std::size_t j = 0; j < cells; ++j) fluct[0][j] += fluct[c][j];

  const MomentSet after = local_moments(e, g, s.threads);

  if (dissipation) {
    double d1_pre_relax = 0.0;
    double spread_before = 0.0;
    double spread_after = 0.0;
    for (std::size_t c = 0; c < cells; ++c) {
      const double f_after = fluct[0][c] * fluct_decay[c] * fluct_decay[c];
      d1_pre_relax += f_after;
      spread_before += psi_rho[c] * fluct[0][c];
      spread_after += psi_rho[c] * f_after;
    }
    const double tilde_before = hydrodynamic_alignment_dissipation(before, table);
    const double tilde_after = hydrodynamic_alignment_dissipation(after, table);
    dissipation->d2_tilde = 0.5 * (tilde_before + tilde_after);
    dissipation->d2 = 0.5 * (tilde_before + spread_before + tilde_after + spread_after);
    dissipation->d1 = std::isfinite(s.epsilon) ? d1_pre_relax * std::exp(-dt / s.epsilon) : d1_pre_relax;
  }

  e = relaxation_substep(std::move(e), after, dt, s.epsilon, s.threads);
  transport(e, 0.5 * dt, s.threads);
  s.time += dt;
  return s;
}

std::vector<double> stress_tensor(const ParticleEnsemble& e, const MomentSet& m) {
  const int d = e.dim;
  std::vector<double> p(m.grid.cell_count() * d * d, 0.0);
  for (std::size_t i = 0; i < e.size(); ++i) {
    const std::size_t c = m.grid.cell_of(e.position(i));
    Vec dev{};
    for (int k = 0; k < d; ++k) dev[k] = e.velocities[i * d + k] - m.u_eps[c * d + k];
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) p[(c * d + a) * d + b] += e.weights[i] * dev[a] * dev[b];
  }
  const double inv_vol = 1.0 / m.grid.cell_volume();
  for (double& x : p) x *= inv_vol;
  return p;
}

std::vector<double> microscopic_acceleration(const MicroState& s, const CommKernel& k) {
  const int d = s.dim;
  const std::size_t n = s.size();
  std::vector<double> acc(n * d, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::span<const double> xi(s.positions.data() + i * d, d);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const std::span<const double> xj(s.positions.data() + j * d, d);
      const double w = k.of_distance_sq(torus_distance_sq(xi, xj)) * inv_n;
      for (int a = 0; a < d; ++a) acc[i * d + a] += w * (s.velocities[j * d + a] - s.velocities[i * d + a]);
    }
  }
  return acc;
}

MicroState microscopic_cs_step(const MicroState& s, const CommKernel& k, double dt) {
  if (s.size() == 0) throw DomainError("microscopic_cs_step: empty system");
  auto shifted = [&](const MicroState& base, const std::vector<double>& dx, const std::vector<double>& dv,
                     double a) {
    MicroState r = base;
    for (std::size_t j = 0; j < r.positions.size(); ++j) {
      r.positions[j] = wrap_unit(base.positions[j] + a * dx[j]);
      r.velocities[j] = base.velocities[j] + a * dv[j];
    }
    return r;
  };
  const auto& x1 = s.velocities;
  const auto v1 = microscopic_acceleration(s, k);
  const MicroState s2 = shifted(s, x1, v1, 0.5 * dt);
  const auto& x2 = s2.velocities;
  const auto v2 = microscopic_acceleration(s2, k);
  const MicroState s3 = shifted(s, x2, v2, 0.5 * dt);
  const auto& x3 = s3.velocities;
  const auto v3 = microscopic_acceleration(s3, k);
  const MicroState s4 = shifted(s, x3, v3, dt);
  const auto& x4 = s4.velocities;
  const auto v4 = microscopic_acceleration(s4, k);

  MicroState out = s;
  for (std::size_t j = 0; j < out.positions.size(); ++j) {
    out.positions[j] = wrap_unit(s.positions[j] + dt / 6.0 * (x1[j] + 2.0 * x2[j] + 2.0 * x3[j] + x4[j]));
    out.velocities[j] = s.velocities[j] + dt / 6.0 * (v1[j] + 2.0 * v2[j] + 2.0 * v3[j] + v4[j]);
  }
  return out;
}

}  // namespace kcs
