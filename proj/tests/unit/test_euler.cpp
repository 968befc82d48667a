#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "kcs/euler.hpp"
#include "kcs/rng.hpp"

using namespace kcs;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

FluidState sine_fluid(int cells, int dim, double rho_amp, double u_mean, double u_amp) {
  InitialDataSpec spec;
  spec.dim = dim;
  spec.rho0 = {1.0, {{{1, dim == 2 ? 1 : 0}, rho_amp, 0.0}}};
  spec.u0[0] = {u_mean, {{{1, 0}, 0.0, u_amp}}};
  spec.u0[1] = {0.5 * u_mean, {{{0, dim == 2 ? 1 : 0}, u_amp, 0.0}}};
  return project_initial_fluid(spec, Grid(cells, dim));
}

// Exact cell average of 1 + a cos(2 pi (x - s)) over cell c of a 1D grid.
double shifted_average(const Grid& g, std::size_t c, double a, double s) {
  const double h = g.cell_width();
  const double x0 = c * h - s, x1 = x0 + h;
  return 1.0 + a * (std::sin(kTwoPi * x1) - std::sin(kTwoPi * x0)) / (kTwoPi * h);
}

}  // namespace

TEST_CASE("a uniform flow stays uniform") {
  for (int dim : {1, 2}) {
    EulerRunState s = make_euler_state(sine_fluid(16, dim, 0.0, 0.3, 0.0), CommKernel(1.0, 1.0));
    for (int n = 0; n < 50; ++n) s = euler_step(std::move(s), 0.01);
    for (double r : s.fluid.rho) CHECK(r == doctest::Approx(1.0).epsilon(1e-13));
    for (std::size_t c = 0; c < s.fluid.grid.cell_count(); ++c) CHECK(s.fluid.u[c * dim] == doctest::Approx(0.3).epsilon(1e-13));
  }
}

TEST_CASE("mass is conserved exactly and momentum to round-off") {
  for (int dim : {1, 2}) {
    EulerRunState s = make_euler_state(sine_fluid(dim == 1 ? 64 : 16, dim, 0.4, 0.05, 0.1), CommKernel(1.0, 1.0));
    const double m0 = s.fluid.mass();
    const Vec p0 = s.fluid.momentum();
    for (int n = 0; n < 100; ++n) s = euler_step(std::move(s), 0.005);
    CHECK(std::abs(s.fluid.mass() - m0) <= 1e-13);
    const Vec p1 = s.fluid.momentum();
    for (int k = 0; k < dim; ++k) CHECK(std::abs(p1[k] - p0[k]) <= 1e-12);
    for (double r : s.fluid.rho) CHECK(r > 0.0);
  }
}

TEST_CASE("pure translation converges to the shifted profile at second order") {
  // Uniform u: alignment vanishes and rho is transported rigidly.
  auto error = [](int cells) {
    EulerRunState s = make_euler_state(sine_fluid(cells, 1, 0.3, 0.37, 0.0), CommKernel(1.0, 1.0));
    const double dt = 0.4 / cells;
    for (int n = 0; n < cells; ++n) s = euler_step(std::move(s), dt);
    double e = 0.0;
    for (std::size_t c = 0; c < s.fluid.grid.cell_count(); ++c)
      e += std::abs(s.fluid.rho[c] - shifted_average(s.fluid.grid, c, 0.3, 0.37 * s.time)) / cells;
    return e;
  };
  const double e32 = error(32), e64 = error(64), e128 = error(128);
  CHECK(e64 < e32);
  CHECK(e32 / e64 >= 3.0);
  CHECK(e64 / e128 >= 3.0);
}

TEST_CASE("alignment source matches the direct double sum and carries no net momentum") {
  const FluidState f = sine_fluid(8, 2, 0.3, 0.1, 0.2);
  const CommKernel k(1.0, 1.0);
  const auto direct = alignment_source(f, k, CellKernel::Path::direct);
  const auto fft = alignment_source(f, k, CellKernel::Path::fft);
  const Grid& g = f.grid;
  Vec total{};
  for (std::size_t a = 0; a < g.cell_count(); ++a) {
    Vec s{};
    const Vec xa = g.cell_center(a);
    for (std::size_t b = 0; b < g.cell_count(); ++b) {
      const Vec xb = g.cell_center(b);
      const double psi = k.of_distance_sq(torus_distance_sq(std::span<const double>(xa.data(), 2),
                                                             std::span<const double>(xb.data(), 2)));
      for (int c = 0; c < 2; ++c) s[c] += f.rho[a] * psi * f.rho[b] * (f.u[b * 2 + c] - f.u[a * 2 + c]) * g.cell_volume();
    }
    for (int c = 0; c < 2; ++c) {
      CHECK(std::abs(direct[a * 2 + c] - s[c]) <= 1e-13);
      CHECK(std::abs(fft[a * 2 + c] - s[c]) <= 1e-12);
      total[c] += direct[a * 2 + c];
    }
  }
  CHECK(std::abs(total[0]) <= 1e-13);
  CHECK(std::abs(total[1]) <= 1e-13);
}

TEST_CASE("velocity gradient and Lipschitz monitor of a sine profile") {
  const int cells = 64;
  const FluidState f = sine_fluid(cells, 1, 0.0, 0.0, 0.1);
  const auto grad = velocity_gradient(f);
  const double h = 1.0 / cells;
  double mx = 0.0;
  for (std::size_t c = 0; c < f.grid.cell_count(); ++c) {
    const double x = f.grid.cell_center(c)[0];
    CHECK(std::abs(grad[c] - 0.1 * kTwoPi * std::cos(kTwoPi * x)) <= 0.1 * std::pow(kTwoPi * h, 2) * kTwoPi);
    mx = std::max(mx, std::abs(grad[c]));
  }
  CHECK(lipschitz_monitor(f) == doctest::Approx(mx).epsilon(1e-15));
  CHECK(make_euler_state(f, CommKernel(1.0, 1.0)).lipschitz_estimate == doctest::Approx(mx));
}

TEST_CASE("large gradients times dt trip the safeguard") {
  EulerRunState s = make_euler_state(sine_fluid(64, 1, 0.0, 0.0, 2.0), CommKernel(1.0, 1.0));
  CHECK(s.lipschitz_estimate > 5.0);
  CHECK_THROWS_AS(euler_step(s, 0.2), SafeguardBreach);
  CHECK_NOTHROW(euler_step(s, 0.01));
  CHECK_THROWS_AS(euler_step(s, -0.01), DomainError);
}

TEST_CASE("interpolated velocity reproduces cell values and midpoints") {
  const FluidState f = sine_fluid(8, 2, 0.2, 0.1, 0.3);
  const Grid& g = f.grid;
  for (std::size_t c = 0; c < g.cell_count(); ++c) {
    const Vec x = g.cell_center(c);
    const Vec u = interpolate_velocity(f, std::span<const double>(x.data(), 2));
    CHECK(u[0] == doctest::Approx(f.u[c * 2]).epsilon(1e-14));
    CHECK(u[1] == doctest::Approx(f.u[c * 2 + 1]).epsilon(1e-14));
  }
  // Midpoint between the last and first column wraps around.
  const double x[2] = {0.0, g.cell_center(0)[1]};
  const std::size_t left = g.cell_index({7, 0}), right = g.cell_index({0, 0});
  CHECK(interpolate_velocity(f, x)[0] == doctest::Approx(0.5 * (f.u[left * 2] + f.u[right * 2])).epsilon(1e-14));
}

TEST_CASE("characteristics of a uniform flow are rigid shifts") {
  const FluidState f = sine_fluid(16, 1, 0.0, 0.3, 0.0);
  CharacteristicMap c = make_characteristics(f.grid);
  for (int n = 0; n < 10; ++n) c = advance_characteristics(c, f, 0.1, &f);
  for (std::size_t i = 0; i < f.grid.cell_count(); ++i)
    CHECK(c.X[i] == doctest::Approx(wrap_unit(f.grid.cell_center(i)[0] + 0.3)).epsilon(1e-13));
  const CharacteristicMap id = make_characteristics(f.grid);
  std::vector<double> rho(f.grid.cell_count());
  for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = 1.0 + 0.5 * rng::uniform(1, i, 0);
  const auto pushed = pushforward_density(id, rho, f.grid);
  for (std::size_t i = 0; i < rho.size(); ++i) CHECK(pushed[i] == doctest::Approx(rho[i]).epsilon(1e-13));
}

TEST_CASE("kinetic energy of the fluid does not increase beyond O(dt^2) per step") {
  EulerRunState s = make_euler_state(sine_fluid(64, 1, 0.3, 0.0, 0.1), CommKernel(1.0, 1.0));
  const double dt = 0.002;
  double e = s.fluid.kinetic_energy();
  for (int n = 0; n < 200; ++n) {
    s = euler_step(std::move(s), dt);
    const double e1 = s.fluid.kinetic_energy();
    CHECK(e1 <= e + dt * dt * e);
    e = e1;
  }
}
