#include "kcs/transport.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace kcs {

namespace {

void require_same(const Grid& g, std::span<const double> r1, std::span<const double> r2) {
  if (r1.size() != g.cell_count() || r2.size() != g.cell_count())
    throw DomainError("density size does not match grid");
}

void require_compatible(const AtomicMeasure& a, const AtomicMeasure& b) {
  if (a.dim != b.dim) throw DomainError("measures live in different dimensions");
  if (a.size() == 0 || b.size() == 0) throw DomainError("measure has no atoms");
}

// Sorted atoms and cumulative weights of a circle measure; cum has size n+1, cum[n] = 1.
struct Quantiles {
  std::vector<double> x;
  std::vector<double> cum;
};

Quantiles quantiles(const AtomicMeasure& mu) {
  std::vector<std::size_t> order(mu.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mu.positions[a] < mu.positions[b]; });
  const double total = std::accumulate(mu.weights.begin(), mu.weights.end(), 0.0);
  Quantiles q;
  q.x.reserve(order.size());
  q.cum.assign(order.size() + 1, 0.0);
  for (std::size_t k = 0; k < order.size(); ++k) {
    q.x.push_back(mu.positions[order[k]]);
    q.cum[k + 1] = q.cum[k] + mu.weights[order[k]] / total;
  }
  q.cum.back() = 1.0;
  return q;
}

// int_0^1 |F^-1(t) - G^-1(t + theta)|^2 dt with G^-1 extended by G^-1(s+1) = G^-1(s) + 1.
double shifted_cost(const Quantiles& f, const Quantiles& g, double theta) {
  const std::size_t n1 = f.x.size();
  const std::size_t n2 = g.x.size();
  double period = std::floor(theta);
  const double r = theta - period;
  std::size_t j = static_cast<std::size_t>(std::upper_bound(g.cum.begin(), g.cum.end(), r) - g.cum.begin()) - 1;
  if (j >= n2) j = n2 - 1;
  std::size_t i = 0;
  double t = 0.0;
  double total = 0.0;
  while (i < n1) {
    const double end_f = f.cum[i + 1];
    const double end_g = g.cum[j + 1] + period - theta;
    const double next = std::min(end_f, end_g);
    if (next > t) {
      const double diff = f.x[i] - (g.x[j] + period);
      total += (next - t) * diff * diff;
      t = next;
    }
    if (end_f <= end_g) ++i;
    if (end_g <= end_f) {
      if (++j == n2) {
        j = 0;
        period += 1.0;
      }
    }
  }
  return total;
}

// Balanced transportation problem solved by the primal simplex on a spanning-tree basis.
TransportSolution transportation_simplex(const std::vector<double>& supply, const std::vector<double>& demand,
                                         const std::vector<double>& cost) {
  const std::size_t m = supply.size();
  const std::size_t n = demand.size();
  const std::size_t nodes = m + n;

  struct Basic {
    std::size_t i;
    std::size_t j;
    double flow;
  };
  std::vector<Basic> basis;
  basis.reserve(nodes - 1);
  {
    std::vector<double> a = supply;
    std::vector<double> b = demand;
    std::size_t i = 0;
    std::size_t j = 0;
    while (true) {
      const double x = std::min(a[i], b[j]);
      basis.push_back({i, j, x});
      a[i] -= x;
      b[j] -= x;
      if (i + 1 == m && j + 1 == n) break;
      // Ties advance the row, leaving a degenerate zero in the next column cell.
      if (i + 1 < m && (j + 1 == n || a[i] <= b[j]))
        ++i;
      else
        ++j;
    }
  }

  std::vector<double> pot(nodes);
  std::vector<std::vector<std::size_t>> adj(nodes);
  std::vector<std::size_t> parent_edge(nodes);
  std::vector<char> seen(nodes);
  std::vector<std::size_t> queue;
  queue.reserve(nodes);

  auto rebuild = [&] {
    for (auto& a : adj) a.clear();
    for (std::size_t e = 0; e < basis.size(); ++e) {
      adj[basis[e].i].push_back(e);
      adj[m + basis[e].j].push_back(e);
    }
  };
  auto other = [&](std::size_t e, std::size_t node) {
    return node < m ? m + basis[e].j : basis[e].i;
  };
  // BFS over the tree from `root`, filling parent_edge.
  auto traverse = [&](std::size_t root, const std::function<void(std::size_t, std::size_t, std::size_t)>& visit) {
    std::fill(seen.begin(), seen.end(), 0);
    queue.clear();
    queue.push_back(root);
    seen[root] = 1;
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const std::size_t node = queue[q];
      for (std::size_t e : adj[node]) {
        const std::size_t nb = other(e, node);
        if (seen[nb]) continue;
        seen[nb] = 1;
        parent_edge[nb] = e;
        visit(node, nb, e);
        queue.push_back(nb);
      }
    }
  };

  double cmax = 0.0;
  for (double c : cost) cmax = std::max(cmax, std::abs(c));
  const double tol = 1e-14 * std::max(cmax, 1.0);
  const std::size_t max_iter = 50 * (m * n + nodes);
  int degenerate_streak = 0;

  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    rebuild();
    pot[0] = 0.0;
    traverse(0, [&](std::size_t node, std::size_t nb, std::size_t e) {
      const double c = cost[basis[e].i * n + basis[e].j];
      pot[nb] = c - pot[node];
    });

    // Pricing: Dantzig normally, first improving cell (Bland) while stalled.
    const bool bland = degenerate_streak > 20;
    std::size_t ei = m;
    std::size_t ej = n;
    double best = -tol;
    for (std::size_t i = 0; i < m && !(bland && ei < m); ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double rc = cost[i * n + j] - pot[i] - pot[m + j];
        if (rc < best) {
          best = bland ? -tol : rc;
          ei = i;
          ej = j;
          if (bland) break;
        }
      }
    }
    if (ei == m) break;

    // Cycle: tree path from row ei to column ej, plus the entering cell.
    traverse(ei, [](std::size_t, std::size_t, std::size_t) {});
    std::vector<std::size_t> path;
    for (std::size_t node = m + ej; node != ei;) {
      const std::size_t e = parent_edge[node];
      path.push_back(e);
      node = other(e, node);
    }
    std::reverse(path.begin(), path.end());  // path[0] touches row ei
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leave = path.size();
    for (std::size_t k = 0; k < path.size(); k += 2) {
      const Basic& b = basis[path[k]];
      if (b.flow < theta || (b.flow == theta && path[k] < path[leave])) {
        theta = b.flow;
        leave = k;
      }
    }
    for (std::size_t k = 0; k < path.size(); ++k) basis[path[k]].flow += (k % 2 == 0 ? -theta : theta);
    const std::size_t leaving_edge = path[leave];
    basis[leaving_edge] = {ei, ej, theta};
    degenerate_streak = theta == 0.0 ? degenerate_streak + 1 : 0;
  }

  TransportSolution out;
  for (const Basic& b : basis) {
    const double flow = std::max(b.flow, 0.0);
    if (flow <= 0.0) continue;
    out.cost += flow * cost[b.i * n + b.j];
    out.plan.entries.push_back({b.i, b.j, flow});
  }
  return out;
}

TransportSolution solve_lp(const AtomicMeasure& mu1, const AtomicMeasure& mu2, bool squared) {
  require_compatible(mu1, mu2);
  const std::size_t m = mu1.size();
  const std::size_t n = mu2.size();
  if (m * n > kOracleCellCap) throw DomainError("transport oracle: n1*n2 exceeds the size cap");
  std::vector<double> cost(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double r2 = torus_distance_sq(mu1.position(i), mu2.position(j));
      cost[i * n + j] = squared ? r2 : std::sqrt(r2);
    }
  TransportSolution s = transportation_simplex(mu1.weights, mu2.weights, cost);
  s.cost = std::max(s.cost, 0.0);
  s.distance = squared ? std::sqrt(s.cost) : s.cost;
  return s;
}

}  // namespace

void AtomicMeasure::validate(double tol) const {
  require_dimension(dim);
  if (positions.size() != weights.size() * dim) throw DomainError("measure arrays have inconsistent lengths");
  for (double w : weights)
    if (!(w > 0.0)) throw DomainError("measure weights must be positive");
  for (double x : positions)
    if (!(x >= 0.0 && x < 1.0)) throw DomainError("measure atom outside [0,1)");
  if (std::abs(std::accumulate(weights.begin(), weights.end(), 0.0) - 1.0) > tol)
    throw DomainError("measure weights must sum to 1");
}

double CouplingPlan::marginal_error(const AtomicMeasure& mu1, const AtomicMeasure& mu2) const {
  std::vector<double> rows(mu1.size(), 0.0);
  std::vector<double> cols(mu2.size(), 0.0);
  for (const Entry& e : entries) {
    rows.at(e.source) += e.mass;
    cols.at(e.target) += e.mass;
  }
  double err = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) err = std::max(err, std::abs(rows[i] - mu1.weights[i]));
  for (std::size_t j = 0; j < cols.size(); ++j) err = std::max(err, std::abs(cols[j] - mu2.weights[j]));
  return err;
}

double l1_distance(const Grid& g, std::span<const double> r1, std::span<const double> r2) {
  require_same(g, r1, r2);
  double s = 0.0;
  for (std::size_t c = 0; c < r1.size(); ++c) s += std::abs(r1[c] - r2[c]);
  return s * g.cell_volume();
}

double l1_distance(const FluidState& a, const FluidState& b) {
  if (!(a.grid == b.grid)) throw DomainError("l1_distance: grid mismatch");
  return l1_distance(a.grid, a.rho, b.rho);
}

double w2_circle(const AtomicMeasure& mu1, const AtomicMeasure& mu2) {
  require_compatible(mu1, mu2);
  if (mu1.dim != 1) throw DomainError("w2_circle requires d = 1");
  const Quantiles f = quantiles(mu1);
  const Quantiles g = quantiles(mu2);
  auto cost = [&](double theta) { return shifted_cost(f, g, theta); };

  // Convex piecewise-linear in theta with kinks at theta = cG[j] - cF[k] + integer.
  double lo = -1.0;
  double hi = 1.0;
  const bool enumerate_all = f.x.size() * g.x.size() <= 64;
  if (!enumerate_all) {
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
      const double m1 = lo + (hi - lo) / 3.0;
      const double m2 = hi - (hi - lo) / 3.0;
      if (cost(m1) < cost(m2))
        hi = m2;
      else
        lo = m1;
    }
    const double pad = 1e-9;
    lo -= pad;
    hi += pad;
  }
  double best = cost(0.5 * (lo + hi));
  for (std::size_t k = 0; k + 1 < f.cum.size(); ++k) {
    for (std::size_t j = 0; j + 1 < g.cum.size(); ++j) {
      for (int shift = -1; shift <= 1; ++shift) {
        const double theta = g.cum[j] - f.cum[k] + shift;
        if (theta < lo || theta > hi) continue;
        best = std::min(best, cost(theta));
      }
    }
  }
  return std::sqrt(std::max(best, 0.0));
}

TransportSolution w2_discrete_oracle(const AtomicMeasure& mu1, const AtomicMeasure& mu2) {
  return solve_lp(mu1, mu2, true);
}

TransportSolution w1_discrete_solution(const AtomicMeasure& mu1, const AtomicMeasure& mu2) {
  return solve_lp(mu1, mu2, false);
}

double w1_discrete(const AtomicMeasure& mu1, const AtomicMeasure& mu2) {
  return w1_discrete_solution(mu1, mu2).distance;
}

AtomicMeasure atomize(const Grid& g, std::span<const double> density) {
  if (density.size() != g.cell_count()) throw DomainError("atomize: density size does not match grid");
  AtomicMeasure mu;
  mu.dim = g.dim();
  double total = 0.0;
  for (double r : density) total += std::max(r, 0.0);
  if (!(total > 0.0)) throw DomainError("atomize: density has no mass");
  for (std::size_t c = 0; c < density.size(); ++c) {
    if (!(density[c] > 0.0)) continue;
    const Vec x = g.cell_center(c);
    for (int k = 0; k < mu.dim; ++k) mu.positions.push_back(x[k]);
    mu.weights.push_back(density[c] / total);
  }
  return mu;
}

AtomicMeasure atomize_coarse(const Grid& g, std::span<const double> density, std::size_t max_atoms) {
  if (density.size() != g.cell_count()) throw DomainError("atomize_coarse: density size does not match grid");
  const int n = g.cells_per_axis();
  const int d = g.dim();
  // Largest divisor B of n with B^d <= max_atoms.
  int blocks = 1;
  for (int b = 1; b <= n; ++b) {
    if (n % b != 0) continue;
    const std::size_t atoms = d == 1 ? b : static_cast<std::size_t>(b) * b;
    if (atoms <= max_atoms) blocks = b;
  }
  const Grid coarse(std::max(blocks, 2), d);
  if (blocks < 2 || coarse.cell_count() > max_atoms) throw DomainError("atomize_coarse: cannot coarsen grid");
  const int ratio = n / blocks;
  std::vector<double> mass(coarse.cell_count(), 0.0);
  for (std::size_t c = 0; c < density.size(); ++c) {
    const auto cc = g.cell_coords(c);
    std::array<int, kMaxDim> bc{};
    for (int k = 0; k < d; ++k) bc[k] = cc[k] / ratio;
    mass[coarse.cell_index(bc)] += density[c];
  }
  return atomize(coarse, mass);
}

double w2_grid(const Grid& g, std::span<const double> r1, std::span<const double> r2) {
  require_same(g, r1, r2);
  if (g.dim() == 1) return w2_circle(atomize(g, r1), atomize(g, r2));
  return w2_discrete_oracle(atomize_coarse(g, r1, 64), atomize_coarse(g, r2, 64)).distance;
}

double w2_grid(const FluidState& a, const FluidState& b) {
  if (!(a.grid == b.grid)) throw DomainError("w2_grid: grid mismatch");
  return w2_grid(a.grid, a.rho, b.rho);
}

double w2_l1_bound_margin(const Grid& g, std::span<const double> r1, std::span<const double> r2) {
  const double w2 = w2_grid(g, r1, r2);
  return g.dim() / 8.0 * l1_distance(g, r1, r2) - w2 * w2;
}

}  // namespace kcs
