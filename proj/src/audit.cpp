#include <algorithm>
#include <cmath>
#include <limits>

#include "kcs/diagnostics.hpp"
#include "kcs/transport.hpp"

namespace kcs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// rho_x sum_y psi rho_y (u_y - u_x) vol for arbitrary (rho, u) fields.
std::vector<double> nonlocal_source(const std::vector<double>& rho, const std::vector<double>& u,
                                    const CellKernel& kernel) {
  const int d = kernel.grid().dim();
  const double vol = kernel.grid().cell_volume();
  std::vector<double> mass(rho.size());
  std::vector<double> mom(u.size());
  for (std::size_t c = 0; c < rho.size(); ++c) {
    mass[c] = rho[c] * vol;
    for (int k = 0; k < d; ++k) mom[c * d + k] = mass[c] * u[c * d + k];
  }
  const auto cm = kernel.convolve(mass, 1);
  const auto cp = kernel.convolve(mom, d);
  std::vector<double> s(u.size());
  for (std::size_t c = 0; c < rho.size(); ++c)
    for (int k = 0; k < d; ++k) s[c * d + k] = rho[c] * (cp[c * d + k] - u[c * d + k] * cm[c]);
  return s;
}

// Largest one-sided difference quotient |u(c + e_axis) - u(c)| / h.
double one_sided_lipschitz(const FluidState& f) {
  const Grid& g = f.grid;
  const int d = g.dim();
  double lip = 0.0;
  for (std::size_t c = 0; c < g.cell_count(); ++c) {
    const auto cc = g.cell_coords(c);
    for (int axis = 0; axis < d; ++axis) {
      auto next = cc;
      ++next[axis];
      const std::size_t cn = g.cell_index(next);
      double du2 = 0.0;
      for (int k = 0; k < d; ++k) du2 += std::pow(f.u[cn * d + k] - f.u[c * d + k], 2);
      lip = std::max(lip, std::sqrt(du2) / g.cell_width());
    }
  }
  return d == 1 ? lip : lip * std::sqrt(static_cast<double>(d));
}

double max_speed(const FluidState& f) {
  const int d = f.grid.dim();
  double m = 0.0;
  for (std::size_t c = 0; c < f.rho.size(); ++c) {
    double s = 0.0;
    for (int k = 0; k < d; ++k) s += f.u[c * d + k] * f.u[c * d + k];
    m = std::max(m, std::sqrt(s));
  }
  return m;
}

std::vector<double> deviation(const HydroPair& p) {
  const int d = p.u.grid.dim();
  std::vector<double> delta(p.u.u.size(), 0.0);
  for (std::size_t c = 0; c < p.u.rho.size(); ++c)
    if (p.u_eps.occupied[c])
      for (int k = 0; k < d; ++k) delta[c * d + k] = p.u_eps.u_eps[c * d + k] - p.u.u[c * d + k];
  return delta;
}

AuditEntry make_entry(std::string name, double margin, double tol, nlohmann::json details, bool surrogate = false) {
  AuditEntry e;
  e.name = std::move(name);
  e.margin = margin;
  e.tolerance = tol;
  e.pass = margin >= -tol;
  e.surrogate = surrogate;
  e.details = std::move(details);
  return e;
}

}  // namespace

KDecomposition k_decomposition(const HydroPair& p, const CellKernel& kernel) {
  p.validate();
  const Grid& g = p.u.grid;
  const int d = g.dim();
  const double vol = g.cell_volume();
  const std::size_t cells = g.cell_count();
  const auto& re = p.u_eps.rho_eps;
  const auto& r = p.u.rho;
  const auto delta = deviation(p);

  KDecomposition out;
  const auto s = nonlocal_source(r, p.u.u, kernel);
  const auto s_eps = nonlocal_source(re, p.u_eps.u_eps, kernel);
  for (std::size_t c = 0; c < cells; ++c) {
    double term = 0.0;
    for (int k = 0; k < d; ++k) {
      if (r[c] > 0.0) term += s[c * d + k] * re[c] * delta[c * d + k] / r[c];
      term += p.u.u[c * d + k] * s_eps[c * d + k];
    }
    out.lhs -= term * vol;
  }

  std::vector<std::size_t> live;
  for (std::size_t c = 0; c < cells; ++c)
    if (p.u_eps.occupied[c]) live.push_back(c);
  double k1 = 0.0;
  for (std::size_t a = 0; a < live.size(); ++a) {
    double row = 0.0;
    for (std::size_t b = a + 1; b < live.size(); ++b) {
      double dd = 0.0;
      for (int k = 0; k < d; ++k) dd += std::pow(delta[live[a] * d + k] - delta[live[b] * d + k], 2);
      row += kernel(live[a], live[b]) * re[live[b]] * dd;
    }
    k1 += re[live[a]] * row;
  }
  out.k1 = -k1 * vol * vol;

  out.k2 = hydrodynamic_alignment_dissipation(p.u_eps, kernel);

  std::vector<double> drho(cells);
  std::vector<double> drho_u(cells * d);
  for (std::size_t c = 0; c < cells; ++c) {
    drho[c] = (re[c] - r[c]) * vol;
    for (int k = 0; k < d; ++k) drho_u[c * d + k] = drho[c] * p.u.u[c * d + k];
  }
  const auto c0 = kernel.convolve(drho, 1);
  const auto c1 = kernel.convolve(drho_u, d);
  for (std::size_t c = 0; c < cells; ++c)
    for (int k = 0; k < d; ++k) out.k3 += vol * re[c] * delta[c * d + k] * (c1[c * d + k] - p.u.u[c * d + k] * c0[c]);
  return out;
}

const AuditEntry& AuditReport::at(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return e;
  throw DomainError("AuditReport: no entry " + name);
}

nlohmann::json AuditReport::to_json() const {
  nlohmann::json j;
  j["tolerance"] = tolerance;
  j["all_pass"] = all_pass;
  for (const auto& e : entries) {
    j["hypotheses"][e.name] = {{"margin", e.margin},
                               {"tolerance", e.tolerance},
                               {"pass", e.pass},
                               {"bounded_surrogate", e.surrogate},
                               {"details", e.details}};
  }
  return j;
}

AuditReport hypothesis_audit(const PairedTrajectory& run, const AuditOptions& options) {
  if (run.samples.empty()) throw DomainError("hypothesis_audit: trajectory has no samples");
  if (run.ledger.rows.empty()) throw DomainError("hypothesis_audit: trajectory has no entropy ledger");
  for (const auto& s : run.samples) {
    if (!(s.moments.grid == s.fluid.grid)) throw DomainError("hypothesis_audit: unpaired sample (grid mismatch)");
  }
  for (std::size_t i = 1; i < run.samples.size(); ++i)
    if (!(run.samples[i].time > run.samples[i - 1].time))
      throw DomainError("hypothesis_audit: sample times must increase");

  const PairedSample& first = run.samples.front();
  const Grid& grid = first.fluid.grid;
  const int d = grid.dim();
  const double vol = grid.cell_volume();
  const double eps = run.epsilon;
  const double f0 = first.kinetic_entropy;

  AuditReport report;
  report.tolerance = options.tolerance >= 0.0 ? options.tolerance : 0.05 * (f0 + 1.0);
  const double tol = report.tolerance;
  const CellKernel kernel(grid, run.kernel);
  const double lambda = run.kernel.lambda();
  const double lip_psi = kernel_lipschitz(run.kernel, d);

  // H1
  {
    const auto margins = entropy_inequality_margins(run.ledger, eps);
    const auto it = std::min_element(margins.begin(), margins.end());
    const std::size_t at = static_cast<std::size_t>(it - margins.begin());
    report.entries.push_back(make_entry("H1", *it, tol,
                                        {{"worst_time", run.ledger.rows[at].t},
                                         {"final_margin", margins.back()},
                                         {"cumulative_d1", run.ledger.rows.back().cum_d1},
                                         {"cumulative_d2_tilde", run.ledger.rows.back().cum_d2_tilde},
                                         {"cumulative_d2", run.ledger.rows.back().cum_d2}}));
  }

  // H2
  {
    const HydroPair p0{first.moments, first.fluid, first.time};
    const double gap_relative = relative_entropy_total(p0);
    double eta_eps = 0.0;
    for (std::size_t c = 0; c < first.moments.rho_eps.size(); ++c)
      for (int k = 0; k < d; ++k)
        eta_eps += 0.5 * first.moments.rho_eps[c] * std::pow(first.moments.u_eps[c * d + k], 2) * vol;
    const double gap_energy = f0 - eta_eps;
    const double c = options.h2_constant;
    const double margin = std::min({c * eps - gap_relative, c * eps - gap_energy, options.energy_bound - f0});
    report.entries.push_back(make_entry("H2", margin, tol,
                                        {{"relative_entropy_gap", gap_relative},
                                         {"energy_gap", gap_energy},
                                         {"initial_entropy", f0},
                                         {"measured_constant_relative", gap_relative / eps},
                                         {"measured_constant_energy", gap_energy / eps},
                                         {"declared_constant", c},
                                         {"energy_bound", options.energy_bound}}));
  }

  double h3 = kInf, h4 = kInf, h5 = kInf, h6 = kInf, h7 = kInf;
  double h3_total_min = kInf;
  double c4 = 0.0, c5 = 0.0, c6 = 0.0, c7 = 0.0;
  double k1_max = -kInf, k2_residual = 0.0, identity_residual = 0.0, k3_bound_min = kInf;
  double integral = 0.0;  // int_0^t int rho_eps |u_eps - u|^2
  double prev_density = 0.0;
  double lip_running = 0.0;
  double l1_initial = l1_distance(grid, first.moments.rho_eps, first.fluid.rho);

  for (std::size_t i = 0; i < run.samples.size(); ++i) {
    const PairedSample& s = run.samples[i];
    const HydroPair pair{s.moments, s.fluid, s.time};
    const auto& m = s.moments;
    const double eta = relative_entropy_total(pair);
    const auto a_rel = relative_flux(pair);
    const auto grad = velocity_gradient(s.fluid);
    const std::size_t cells = grid.cell_count();

    double grad_max = 0.0;
    double lhs4 = 0.0;
    double lhs5 = 0.0;
    double d1 = 0.0;
    double gap3_min = kInf;
    double gap3_total = 0.0;
    for (std::size_t c = 0; c < cells; ++c) {
      double fro2 = 0.0;
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) {
          const std::size_t idx = (c * d + a) * d + b;
          fro2 += grad[idx] * grad[idx];
          lhs4 += grad[idx] * a_rel[idx] * vol;
          lhs5 += grad[idx] * s.stress[idx] * vol;
        }
      grad_max = std::max(grad_max, std::sqrt(fro2));
      double tr = 0.0;
      for (int a = 0; a < d; ++a) tr += s.stress[(c * d + a) * d + a];
      d1 += tr * vol;
      double kin = 0.0;
      for (int a = 0; a < d; ++a) kin += 0.5 * m.rho_eps[c] * m.u_eps[c * d + a] * m.u_eps[c * d + a];
      gap3_min = std::min(gap3_min, m.energy[c] - kin);
      gap3_total += (m.energy[c] - kin) * vol;
    }
    h3 = std::min(h3, gap3_min);
    h3_total_min = std::min(h3_total_min, gap3_total);
    h4 = std::min(h4, grad_max * 2.0 * eta - std::abs(lhs4));
    if (eta > 0.0) c4 = std::max(c4, std::abs(lhs4) / eta);
    h5 = std::min(h5, grad_max * d1 - std::abs(lhs5));
    if (d1 > 0.0) c5 = std::max(c5, std::abs(lhs5) / d1);

    // H6
    const KDecomposition kd = k_decomposition(pair, kernel);
    const double d2t = dissipation_d2_tilde(m, run.kernel);
    const double w2 = w2_grid(grid, m.rho_eps, s.fluid.rho);
    double weighted_abs = 0.0;
    double weighted_sq = 0.0;
    const auto delta = deviation(pair);
    for (std::size_t c = 0; c < cells; ++c) {
      double dd = 0.0;
      for (int k = 0; k < d; ++k) dd += delta[c * d + k] * delta[c * d + k];
      weighted_abs += m.rho_eps[c] * std::sqrt(dd) * vol;
      weighted_sq += m.rho_eps[c] * dd * vol;
    }
    const double lip_u = one_sided_lipschitz(s.fluid);
    const double umax = max_speed(s.fluid);
    const double lk3 = lambda * lip_u + lip_psi * umax + (lambda + lip_psi) * umax;
    const double bound3 = lk3 * w2 * weighted_abs - kd.k3;
    const double residual = std::abs(kd.lhs - (kd.k1 + kd.k2 + kd.k3));
    const double k2_gap = std::abs(kd.k2 - d2t);
    k1_max = std::max(k1_max, kd.k1);
    k3_bound_min = std::min(k3_bound_min, bound3);
    identity_residual = std::max(identity_residual, residual);
    k2_residual = std::max(k2_residual, k2_gap);
    h6 = std::min(h6, std::min(-kd.k1, bound3) - residual - k2_gap);
    const double denom6 = w2 * w2 + eta;
    if (denom6 > 0.0) c6 = std::max(c6, (kd.lhs - d2t) / denom6);

    // H7
    if (i > 0) integral += 0.5 * (prev_density + weighted_sq) * (s.time - run.samples[i - 1].time);
    prev_density = weighted_sq;
    lip_running = std::max(lip_running, lip_u);
    const double t = s.time - first.time;
    const double bound7 = 2.0 * std::exp((1.0 + 2.0 * lip_running) * t) * integral + d / 4.0 * l1_initial;
    h7 = std::min(h7, bound7 - w2 * w2);
    c7 = std::max(c7, w2 * w2 / (integral + eps));
  }

  report.entries.push_back(make_entry("H3", h3, tol, {{"min_cell_gap", h3}, {"min_integrated_gap", h3_total_min}}));
  report.entries.push_back(make_entry("H4", h4, tol, {{"measured_constant", c4}}));
  report.entries.push_back(make_entry("H5", h5, tol, {{"measured_constant", c5}}, true));
  report.entries.push_back(make_entry("H6", h6, tol,
                                      {{"max_k1", k1_max},
                                       {"max_k2_minus_d2_tilde", k2_residual},
                                       {"max_identity_residual", identity_residual},
                                       {"min_k3_bound_margin", k3_bound_min},
                                       {"measured_constant", c6}}));
  report.entries.push_back(make_entry("H7", h7, tol,
                                      {{"measured_constant", c7},
                                       {"initial_l1_gap", l1_initial},
                                       {"lipschitz_max", lip_running},
                                       {"final_integral", integral}}));

  report.all_pass = std::all_of(report.entries.begin(), report.entries.end(), [](const AuditEntry& e) { return e.pass; });
  return report;
}

}  // namespace kcs
