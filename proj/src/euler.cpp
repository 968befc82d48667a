#include "kcs/euler.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kcs/parallel.hpp"

namespace kcs {

namespace {

std::string breach_message(double time, double lipschitz, double dt, double threshold) {
  std::ostringstream os;
  os << "euler_step refused at t=" << time << ": lipschitz estimate " << lipschitz << " times dt " << dt
     << " reaches safeguard " << threshold;
  return os.str();
}

int wrap_index(long i, int g) {
  const long r = i % g;
  return static_cast<int>(r < 0 ? r + g : r);
}

double mc_slope(double left, double mid, double right) {
  const double a = right - mid;
  const double b = mid - left;
  if (a * b <= 0.0) return 0.0;
  const double m = std::min({2.0 * std::abs(a), 2.0 * std::abs(b), 0.5 * std::abs(a + b)});
  return a > 0.0 ? m : -m;
}

// Linear interpolation of cell-centered values on a periodic line of width h.
double line_interp(const std::vector<double>& v, double h, double x) {
  const int g = static_cast<int>(v.size());
  const double s = x / h - 0.5;
  const double fl = std::floor(s);
  const double t = s - fl;
  const long j = static_cast<long>(fl);
  return (1.0 - t) * v[wrap_index(j, g)] + t * v[wrap_index(j + 1, g)];
}

// Cumulative integral of a periodic piecewise-linear reconstruction.
class Primitive {
 public:
  Primitive(const std::vector<double>& q, double h) : q_(q), h_(h), slope_(q.size()), prefix_(q.size() + 1, 0.0) {
    const int g = static_cast<int>(q.size());
    for (int j = 0; j < g; ++j) {
      slope_[j] = mc_slope(q[wrap_index(j - 1, g)], q[j], q[wrap_index(j + 1, g)]);
      prefix_[j + 1] = prefix_[j] + h * q[j];
    }
  }

  double operator()(double x) const {
    const int g = static_cast<int>(q_.size());
    const double y = x / h_;
    const double fl = std::floor(y);
    const double s = y - fl;
    const long k = static_cast<long>(fl);
    const long period = k >= 0 ? k / g : -((-k + g - 1) / g);
    const int j = static_cast<int>(k - period * g);
    return period * prefix_[g] + prefix_[j] + h_ * (q_[j] * s + 0.5 * slope_[j] * (s * s - s));
  }

 private:
  const std::vector<double>& q_;
  double h_;
  std::vector<double> slope_;
  std::vector<double> prefix_;
};

// Remaps the cell densities in `lines` along one periodic line with velocity `vel`.
void remap_line(std::vector<std::vector<double>>& lines, const std::vector<double>& vel, double h, double dt) {
  const int g = static_cast<int>(vel.size());
  std::vector<double> dep(g);
  for (int i = 0; i < g; ++i) {
    const double xf = (i + 1) * h;
    const double xm = xf - 0.5 * dt * line_interp(vel, h, xf);
    dep[i] = xf - dt * line_interp(vel, h, xm);
  }
  for (auto& q : lines) {
    const Primitive phi(q, h);
    std::vector<double> out(g);
    double left = phi(dep[g - 1] - 1.0);
    for (int i = 0; i < g; ++i) {
      const double right = phi(dep[i]);
      out[i] = (right - left) / h;
      left = right;
    }
    q = std::move(out);
  }
}

// Conserved variables: rho and P = rho u, each as a flat (cell[, axis]) array.
struct Conserved {
  std::vector<double> rho;
  std::vector<double> mom;
};

Conserved to_conserved(const FluidState& f) {
  const int d = f.grid.dim();
  Conserved c{f.rho, std::vector<double>(f.u.size())};
  for (std::size_t i = 0; i < f.rho.size(); ++i)
    for (int k = 0; k < d; ++k) c.mom[i * d + k] = f.rho[i] * f.u[i * d + k];
  return c;
}

void velocities_from(const Conserved& c, FluidState& f) {
  const int d = f.grid.dim();
  f.rho = c.rho;
  f.u.assign(c.mom.size(), 0.0);
  for (std::size_t i = 0; i < c.rho.size(); ++i)
    if (c.rho[i] > 0.0)
      for (int k = 0; k < d; ++k) f.u[i * d + k] = c.mom[i * d + k] / c.rho[i];
}

// One directional sweep of every line parallel to `axis`.
void sweep(Conserved& c, const Grid& grid, int axis, double dt, int threads) {
  const int g = grid.cells_per_axis();
  const int d = grid.dim();
  const double h = grid.cell_width();
  const std::size_t line_count = grid.cell_count() / g;
  parallel_chunks(line_count, threads, [&](std::size_t begin, std::size_t end, int) {
    std::vector<std::vector<double>> lines(1 + d, std::vector<double>(g));
    std::vector<double> vel(g);
    for (std::size_t line = begin; line < end; ++line) {
      auto cell_at = [&](int i) -> std::size_t {
        if (d == 1) return static_cast<std::size_t>(i);
        return axis == 0 ? static_cast<std::size_t>(i) + line * g : line + static_cast<std::size_t>(i) * g;
      };
      for (int i = 0; i < g; ++i) {
        const std::size_t cell = cell_at(i);
        lines[0][i] = c.rho[cell];
        for (int k = 0; k < d; ++k) lines[1 + k][i] = c.mom[cell * d + k];
        vel[i] = c.rho[cell] > 0.0 ? c.mom[cell * d + axis] / c.rho[cell] : 0.0;
      }
      remap_line(lines, vel, h, dt);
      for (int i = 0; i < g; ++i) {
        const std::size_t cell = cell_at(i);
        c.rho[cell] = lines[0][i];
        for (int k = 0; k < d; ++k) c.mom[cell * d + k] = lines[1 + k][i];
      }
    }
  });
}

// rho_x conv(P vol)_x - P_x conv(rho vol)_x, linear in P for fixed rho.
std::vector<double> source_of(const std::vector<double>& rho, const std::vector<double>& mom, const CellKernel& table,
                              int d, CellKernel::Path path) {
  const double vol = table.grid().cell_volume();
  std::vector<double> rv(rho.size());
  std::vector<double> pv(mom.size());
  for (std::size_t i = 0; i < rho.size(); ++i) rv[i] = rho[i] * vol;
  for (std::size_t j = 0; j < mom.size(); ++j) pv[j] = mom[j] * vol;
  const auto conv_rho = table.convolve(rv, 1, path);
  const auto conv_mom = table.convolve(pv, d, path);
  std::vector<double> s(mom.size());
  for (std::size_t i = 0; i < rho.size(); ++i)
    for (int k = 0; k < d; ++k) s[i * d + k] = rho[i] * conv_mom[i * d + k] - mom[i * d + k] * conv_rho[i];
  return s;
}

}  // namespace

SafeguardBreach::SafeguardBreach(double t, double lip, double dt, double threshold)
    : std::runtime_error(breach_message(t, lip, dt, threshold)), time(t), lipschitz(lip) {}

EulerRunState make_euler_state(FluidState fluid, const CommKernel& kernel) {
  EulerRunState s;
  s.fluid = std::move(fluid);
  s.kernel = kernel;
  s.lipschitz_estimate = lipschitz_monitor(s.fluid);
  return s;
}

std::vector<double> alignment_source(const FluidState& f, const CommKernel& k, CellKernel::Path path) {
  const CellKernel table(f.grid, k);
  const Conserved c = to_conserved(f);
  return source_of(c.rho, c.mom, table, f.grid.dim(), path);
}

EulerRunState euler_step(EulerRunState s, double dt) {
  if (!(dt > 0.0)) throw DomainError("euler_step: dt must be positive");
  const double lip = lipschitz_monitor(s.fluid);
  if (lip * dt >= s.safeguard) throw SafeguardBreach(s.time, lip, dt, s.safeguard);

  const Grid& grid = s.fluid.grid;
  const int d = grid.dim();
  Conserved c = to_conserved(s.fluid);
  if (d == 1) {
    sweep(c, grid, 0, dt, s.threads);
  } else {
    const int first = s.step_count % 2 == 0 ? 0 : 1;
    sweep(c, grid, first, dt, s.threads);
    sweep(c, grid, 1 - first, dt, s.threads);
  }

  const CellKernel table(grid, s.kernel);
  const auto k1 = source_of(c.rho, c.mom, table, d, s.convolution);
  std::vector<double> trial(c.mom.size());
  for (std::size_t j = 0; j < trial.size(); ++j) trial[j] = c.mom[j] + dt * k1[j];
  const auto k2 = source_of(c.rho, trial, table, d, s.convolution);
  for (std::size_t j = 0; j < trial.size(); ++j) c.mom[j] += 0.5 * dt * (k1[j] + k2[j]);

  double mass = 0.0;
  for (double r : c.rho) mass += r;
  mass *= grid.cell_volume();
  const double factor = 1.0 / mass;
  for (double& r : c.rho) r *= factor;
  for (double& p : c.mom) p *= factor;

  velocities_from(c, s.fluid);
  s.time += dt;
  ++s.step_count;
  s.lipschitz_estimate = lipschitz_monitor(s.fluid);
  return s;
}

std::vector<double> velocity_gradient(const FluidState& f) {
  const Grid& g = f.grid;
  const int d = g.dim();
  const double inv2h = 0.5 / g.cell_width();
  std::vector<double> grad(g.cell_count() * d * d);
  for (std::size_t c = 0; c < g.cell_count(); ++c) {
    const auto cc = g.cell_coords(c);
    for (int axis = 0; axis < d; ++axis) {
      auto plus = cc;
      auto minus = cc;
      ++plus[axis];
      --minus[axis];
      const std::size_t cp = g.cell_index(plus);
      const std::size_t cm = g.cell_index(minus);
      for (int comp = 0; comp < d; ++comp)
        grad[(c * d + comp) * d + axis] = (f.u[cp * d + comp] - f.u[cm * d + comp]) * inv2h;
    }
  }
  return grad;
}

double lipschitz_monitor(const FluidState& f) {
  double m = 0.0;
  for (double x : velocity_gradient(f)) m = std::max(m, std::abs(x));
  return m;
}

Vec interpolate_velocity(const FluidState& f, std::span<const double> x) {
  const Grid& g = f.grid;
  const int d = g.dim();
  const int n = g.cells_per_axis();
  std::array<long, kMaxDim> base{};
  std::array<double, kMaxDim> frac{};
  for (int k = 0; k < d; ++k) {
    const double s = x[k] * n - 0.5;
    const double fl = std::floor(s);
    base[k] = static_cast<long>(fl);
    frac[k] = s - fl;
  }
  Vec out{};
  const int corners = 1 << d;
  for (int corner = 0; corner < corners; ++corner) {
    double w = 1.0;
    std::array<int, kMaxDim> idx{};
    for (int k = 0; k < d; ++k) {
      const int bit = (corner >> k) & 1;
      w *= bit ? frac[k] : 1.0 - frac[k];
      idx[k] = wrap_index(base[k] + bit, n);
    }
    const std::size_t cell = g.cell_index(idx);
    for (int k = 0; k < d; ++k) out[k] += w * f.u[cell * d + k];
  }
  return out;
}

CharacteristicMap make_characteristics(const Grid& grid) {
  CharacteristicMap c{grid, std::vector<double>(grid.cell_count() * grid.dim())};
  for (std::size_t cell = 0; cell < grid.cell_count(); ++cell) {
    const Vec x = grid.cell_center(cell);
    for (int k = 0; k < grid.dim(); ++k) c.X[cell * grid.dim() + k] = x[k];
  }
  return c;
}

CharacteristicMap advance_characteristics(const CharacteristicMap& c, const FluidState& f, double dt,
                                          const FluidState* next) {
  const int d = c.grid.dim();
  if (f.grid.dim() != d) throw DomainError("advance_characteristics: dimension mismatch");
  CharacteristicMap out = c;
  for (std::size_t cell = 0; cell < c.grid.cell_count(); ++cell) {
    const std::span<const double> x(c.X.data() + cell * d, d);
    const Vec k1 = interpolate_velocity(f, x);
    Vec stage{};
    for (int k = 0; k < d; ++k) stage[k] = wrap_unit(x[k] + (next ? dt : 0.5 * dt) * k1[k]);
    const std::span<const double> xs(stage.data(), d);
    if (next) {
      const Vec k2 = interpolate_velocity(*next, xs);
      for (int k = 0; k < d; ++k) out.X[cell * d + k] = wrap_unit(x[k] + 0.5 * dt * (k1[k] + k2[k]));
    } else {
      const Vec k2 = interpolate_velocity(f, xs);
      for (int k = 0; k < d; ++k) out.X[cell * d + k] = wrap_unit(x[k] + dt * k2[k]);
    }
  }
  return out;
}

std::vector<double> pushforward_density(const CharacteristicMap& c, std::span<const double> rho0,
                                        const Grid& target) {
  const int d = c.grid.dim();
  if (target.dim() != d) throw DomainError("pushforward_density: dimension mismatch");
  if (rho0.size() != c.grid.cell_count()) throw DomainError("pushforward_density: rho0 size mismatch");
  const int n = target.cells_per_axis();
  std::vector<double> out(target.cell_count(), 0.0);
  const double src_vol = c.grid.cell_volume();
  const int corners = 1 << d;
  for (std::size_t cell = 0; cell < c.grid.cell_count(); ++cell) {
    const double mass = rho0[cell] * src_vol;
    std::array<long, kMaxDim> base{};
    std::array<double, kMaxDim> frac{};
    for (int k = 0; k < d; ++k) {
      const double s = c.X[cell * d + k] * n - 0.5;
      const double fl = std::floor(s);
      base[k] = static_cast<long>(fl);
      frac[k] = s - fl;
    }
    for (int corner = 0; corner < corners; ++corner) {
      double w = 1.0;
      std::array<int, kMaxDim> idx{};
      for (int k = 0; k < d; ++k) {
        const int bit = (corner >> k) & 1;
        w *= bit ? frac[k] : 1.0 - frac[k];
        idx[k] = wrap_index(base[k] + bit, n);
      }
      out[target.cell_index(idx)] += w * mass;
    }
  }
  const double inv_vol = 1.0 / target.cell_volume();
  for (double& x : out) x *= inv_vol;
  return out;
}

}  // namespace kcs
