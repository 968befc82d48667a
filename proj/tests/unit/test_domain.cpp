#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "kcs/domain.hpp"
#include "kcs/parallel.hpp"
#include "kcs/rng.hpp"

using namespace kcs;

TEST_CASE("wrap_unit maps onto [0,1)") {
  CHECK(wrap_unit(0.25) == doctest::Approx(0.25));
  CHECK(wrap_unit(1.25) == doctest::Approx(0.25));
  CHECK(wrap_unit(-0.25) == doctest::Approx(0.75));
  CHECK(wrap_unit(1.0) == 0.0);
  const double tiny = wrap_unit(-1e-18);
  CHECK(tiny >= 0.0);
  CHECK(tiny < 1.0);
}

TEST_CASE("circle displacement takes the short way round") {
  CHECK(circle_displacement(0.1, 0.9) == doctest::Approx(-0.2));
  CHECK(circle_displacement(0.9, 0.1) == doctest::Approx(0.2));
  CHECK(std::abs(circle_displacement(0.0, 0.5)) == doctest::Approx(0.5));
}

TEST_CASE("torus distance: symmetric, bounded by sqrt(d)/2, brute force over images") {
  for (int i = 0; i < 200; ++i) {
    const double a[2] = {rng::uniform(1, i, 0), rng::uniform(1, i, 1)};
    const double b[2] = {rng::uniform(1, i, 2), rng::uniform(1, i, 3)};
    double best = 1e9;
    for (int sx = -1; sx <= 1; ++sx)
      for (int sy = -1; sy <= 1; ++sy) {
        const double dx = a[0] - b[0] + sx, dy = a[1] - b[1] + sy;
        best = std::min(best, dx * dx + dy * dy);
      }
    CHECK(torus_distance_sq(a, b) == doctest::Approx(best).epsilon(1e-13));
    CHECK(torus_distance_sq(a, b) == doctest::Approx(torus_distance_sq(b, a)).epsilon(1e-15));
    CHECK(torus_distance_sq(a, b) <= 0.5 + 1e-15);
  }
}

TEST_CASE("kernel values, minimum and Lipschitz constant") {
  const CommKernel k(2.0, 1.5);
  CHECK(k.of_distance(0.0) == doctest::Approx(2.0));
  CHECK(k.of_distance(0.5) == doctest::Approx(2.0 / std::pow(1.25, 1.5)));
  CHECK(kernel_min(CommKernel(1.0, 1.0), 1) == doctest::Approx(0.8));
  CHECK(kernel_min(CommKernel(1.0, 1.0), 2) == doctest::Approx(1.0 / 1.5));
  CHECK(kernel_min(CommKernel(3.0, 0.0), 2) == doctest::Approx(3.0));
  CHECK_THROWS_AS(CommKernel(0.0, 1.0), DomainError);
  CHECK_THROWS_AS(CommKernel(1.0, -1.0), DomainError);

  for (int dim : {1, 2})
    for (double beta : {0.0, 0.5, 1.0, 4.0}) {
      const CommKernel kk(1.3, beta);
      const double rmax = std::sqrt(static_cast<double>(dim)) / 2.0;
      double fd = 0.0;
      const int n = 20000;
      for (int i = 0; i < n; ++i) {
        const double r0 = rmax * i / n, r1 = rmax * (i + 1) / n;
        fd = std::max(fd, std::abs(kk.of_distance(r1) - kk.of_distance(r0)) / (r1 - r0));
      }
      // The maximum may sit at r = rmax, where a chord is only first order:
      // Richardson-extrapolate the one-sided slope there.
      const double hh = 1e-4;
      const double s1 = (kk.of_distance(rmax - hh) - kk.of_distance(rmax)) / hh;
      const double s2 = (kk.of_distance(rmax - hh / 2) - kk.of_distance(rmax)) / (hh / 2);
      fd = std::max(fd, std::abs(2.0 * s2 - s1));
      CHECK(kernel_lipschitz(kk, dim) == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("grid cells: centers map back to their cell, periodic indexing") {
  for (int dim : {1, 2}) {
    const Grid g(8, dim);
    CHECK(g.cell_count() == static_cast<std::size_t>(dim == 1 ? 8 : 64));
    CHECK(g.cell_volume() == doctest::Approx(std::pow(0.125, dim)));
    for (std::size_t c = 0; c < g.cell_count(); ++c) {
      const Vec x = g.cell_center(c);
      CHECK(g.cell_of(std::span<const double>(x.data(), dim)) == c);
      CHECK(g.cell_index(g.cell_coords(c)) == c);
    }
    std::array<int, kMaxDim> wrapped{-1, dim == 2 ? 8 : 0};
    std::array<int, kMaxDim> plain{7, 0};
    CHECK(g.cell_index(wrapped) == g.cell_index(plain));
  }
  CHECK_THROWS_AS(Grid(1, 1), DomainError);
  CHECK_THROWS_AS(Grid(4, 3), DomainError);
}

TEST_CASE("initial ensemble: weights, positions, velocity statistics") {
  InitialDataSpec spec;
  spec.dim = 1;
  spec.rho0 = {1.0, {{{1, 0}, 0.3, 0.0}}};
  spec.u0[0] = {0.0, {{{1, 0}, 0.0, 0.1}}};
  spec.epsilon = 0.04;
  spec.particle_count = 20000;
  spec.seed = 7;
  const ParticleEnsemble e = build_initial_ensemble(spec);
  e.validate();
  CHECK(std::abs(e.total_mass() - 1.0) <= 1e-12);
  for (double x : e.positions) {
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }

  // Residual v - u0(x): mean 0, variance epsilon; CLT bounds at 5 sigma.
  const double n = static_cast<double>(e.size());
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double r = e.velocities[i] - spec.velocity_at(e.position(i))[0];
    s1 += r;
    s2 += r * r;
  }
  const double mean = s1 / n, var = s2 / n - mean * mean;
  CHECK(std::abs(mean) <= 5.0 * std::sqrt(spec.epsilon / n));
  CHECK(std::abs(var - spec.epsilon) <= 5.0 * spec.epsilon * std::sqrt(2.0 / n));

  // Histogram against the normalized density on 10 bins.
  const FourierProfile rho = spec.normalized_density();
  std::vector<double> hist(10, 0.0);
  for (double x : e.positions) hist[std::min(9, static_cast<int>(x * 10))] += 1.0 / n;
  for (int b = 0; b < 10; ++b) {
    double exact = 0.0;
    for (int q = 0; q < 1000; ++q) {
      const double x = (b + (q + 0.5) / 1000.0) / 10.0;
      exact += rho(std::span<const double>(&x, 1)) / 10000.0;
    }
    CHECK(hist[b] == doctest::Approx(exact).epsilon(1e-3 / exact));
  }
}

TEST_CASE("mono-kinetic data places every velocity on u0") {
  InitialDataSpec spec;
  spec.dim = 2;
  spec.u0[0] = {0.2, {{{1, 1}, 0.1, 0.0}}};
  spec.u0[1] = {-0.1, {}};
  spec.thermal_variance = 0.0;
  spec.particle_count = 500;
  const ParticleEnsemble e = build_initial_ensemble(spec);
  for (std::size_t i = 0; i < e.size(); ++i) {
    const Vec u = spec.velocity_at(e.position(i));
    CHECK(e.velocity(i)[0] == u[0]);
    CHECK(e.velocity(i)[1] == u[1]);
  }
}

TEST_CASE("fluid projection carries unit mass and the cell-averaged momentum") {
  InitialDataSpec spec;
  spec.rho0 = {1.0, {{{1, 0}, 0.5, 0.0}}};
  spec.u0[0] = {0.3, {}};
  const FluidState f = project_initial_fluid(spec, Grid(32, 1));
  CHECK(f.mass() == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(f.momentum()[0] == doctest::Approx(0.3).epsilon(1e-13));
  for (double u : f.u) CHECK(u == doctest::Approx(0.3).epsilon(1e-13));
}

TEST_CASE("cell kernel convolution: brute force and FFT agree") {
  for (int dim : {1, 2}) {
    const Grid g(dim == 1 ? 16 : 8, dim);
    const CommKernel k(1.0, 1.0);
    const CellKernel ck(g, k);
    std::vector<double> field(g.cell_count() * 2);
    for (std::size_t i = 0; i < field.size(); ++i) field[i] = rng::normal(3, i, 0);
    std::vector<double> brute(field.size(), 0.0);
    for (std::size_t a = 0; a < g.cell_count(); ++a)
      for (std::size_t b = 0; b < g.cell_count(); ++b) {
        const Vec xa = g.cell_center(a), xb = g.cell_center(b);
        const double psi = k.of_distance_sq(torus_distance_sq(std::span<const double>(xa.data(), dim),
                                                               std::span<const double>(xb.data(), dim)));
        CHECK(ck(a, b) == doctest::Approx(psi).epsilon(1e-14));
        for (int c = 0; c < 2; ++c) brute[a * 2 + c] += psi * field[b * 2 + c];
      }
    const auto direct = ck.convolve(field, 2, CellKernel::Path::direct);
    const auto fft = ck.convolve(field, 2, CellKernel::Path::fft);
    for (std::size_t i = 0; i < field.size(); ++i) {
      CHECK(direct[i] == doctest::Approx(brute[i]).epsilon(1e-12));
      CHECK(std::abs(fft[i] - brute[i]) <= 1e-12 * (1.0 + std::abs(brute[i])));
    }
  }
}

TEST_CASE("parallel_chunks covers every index exactly once") {
  for (int threads : {1, 2, 3, 8})
    for (std::size_t n : {0u, 1u, 5u, 1000u}) {
      std::vector<int> hits(n, 0);
      parallel_chunks(n, threads, [&](std::size_t b, std::size_t e, int) {
        for (std::size_t i = b; i < e; ++i) ++hits[i];
      });
      CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    }
}

TEST_CASE("counter-based random numbers are reproducible and in range") {
  std::set<double> seen;
  double s = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng::uniform(11, i, 2);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(u == rng::uniform(11, i, 2));
    s += rng::normal(11, i, 3);
    seen.insert(u);
  }
  CHECK(seen.size() == static_cast<std::size_t>(n));
  CHECK(std::abs(s / n) <= 5.0 / std::sqrt(n));
  CHECK(rng::uniform(11, 0, 2) != rng::uniform(12, 0, 2));
}
