#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <mutex>

#include "kcs/domain.hpp"

namespace kcs {

namespace {

// FFTW's planner is not reentrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

CellKernel::CellKernel(const Grid& grid, const CommKernel& kernel) : grid_(grid) {
  const int g = grid.cells_per_axis();
  const double h = grid.cell_width();
  table_.resize(grid.cell_count());
  for (std::size_t c = 0; c < table_.size(); ++c) {
    const auto off = grid.cell_coords(c);
    double r2 = 0.0;
    for (int k = 0; k < grid.dim(); ++k) {
      const int m = std::min(off[k], g - off[k]);
      r2 += (m * h) * (m * h);
    }
    table_[c] = kernel.of_distance_sq(r2);
  }
}

double CellKernel::operator()(std::size_t a, std::size_t b) const {
  const auto ca = grid_.cell_coords(a);
  const auto cb = grid_.cell_coords(b);
  return table_[grid_.cell_index({ca[0] - cb[0], ca[1] - cb[1]})];
}

double CellKernel::max_value() const { return *std::max_element(table_.begin(), table_.end()); }

std::vector<double> CellKernel::convolve(std::span<const double> field, int components, Path path) const {
  const std::size_t cells = grid_.cell_count();
  if (field.size() != cells * components) throw DomainError("convolve: field size does not match grid");
  if (path == Path::fft) return convolve_fft(field, components);

  std::vector<double> out(field.size(), 0.0);
  const int g = grid_.cells_per_axis();
  if (grid_.dim() == 1) {
    for (int i = 0; i < g; ++i) {
      for (int j = 0; j < g; ++j) {
        const int off = i - j < 0 ? i - j + g : i - j;
        const double w = table_[off];
        for (int k = 0; k < components; ++k) out[i * components + k] += w * field[j * components + k];
      }
    }
    return out;
  }
  for (int iy = 0; iy < g; ++iy) {
    for (int ix = 0; ix < g; ++ix) {
      const std::size_t c = ix + static_cast<std::size_t>(g) * iy;
      for (int jy = 0; jy < g; ++jy) {
        const int oy = iy - jy < 0 ? iy - jy + g : iy - jy;
        const double* row = table_.data() + static_cast<std::size_t>(g) * oy;
        for (int jx = 0; jx < g; ++jx) {
          const int ox = ix - jx < 0 ? ix - jx + g : ix - jx;
          const std::size_t src = jx + static_cast<std::size_t>(g) * jy;
          for (int k = 0; k < components; ++k) out[c * components + k] += row[ox] * field[src * components + k];
        }
      }
    }
  }
  return out;
}

std::vector<double> CellKernel::convolve_fft(std::span<const double> field, int components) const {
  const int g = grid_.cells_per_axis();
  const std::size_t cells = grid_.cell_count();
  // Row-major FFTW layout: slowest axis first, i.e. (y, x).
  const std::size_t spectral = grid_.dim() == 1 ? static_cast<std::size_t>(g / 2 + 1)
                                                : static_cast<std::size_t>(g) * (g / 2 + 1);
  std::vector<double> real(cells);
  std::vector<std::complex<double>> kernel_hat(spectral), field_hat(spectral);
  auto* kh = reinterpret_cast<fftw_complex*>(kernel_hat.data());
  auto* fh = reinterpret_cast<fftw_complex*>(field_hat.data());

  fftw_plan forward_kernel, forward_field, backward;
  {
    std::lock_guard lock(planner_mutex());
    if (grid_.dim() == 1) {
      forward_kernel = fftw_plan_dft_r2c_1d(g, real.data(), kh, FFTW_ESTIMATE);
      forward_field = fftw_plan_dft_r2c_1d(g, real.data(), fh, FFTW_ESTIMATE);
      backward = fftw_plan_dft_c2r_1d(g, fh, real.data(), FFTW_ESTIMATE);
    } else {
      forward_kernel = fftw_plan_dft_r2c_2d(g, g, real.data(), kh, FFTW_ESTIMATE);
      forward_field = fftw_plan_dft_r2c_2d(g, g, real.data(), fh, FFTW_ESTIMATE);
      backward = fftw_plan_dft_c2r_2d(g, g, fh, real.data(), FFTW_ESTIMATE);
    }
  }
  std::copy(table_.begin(), table_.end(), real.begin());
  fftw_execute(forward_kernel);

  std::vector<double> out(field.size());
  const double scale = 1.0 / static_cast<double>(cells);
  for (int k = 0; k < components; ++k) {
    for (std::size_t c = 0; c < cells; ++c) real[c] = field[c * components + k];
    fftw_execute(forward_field);
    for (std::size_t s = 0; s < spectral; ++s) field_hat[s] *= kernel_hat[s];
    fftw_execute(backward);
    for (std::size_t c = 0; c < cells; ++c) out[c * components + k] = real[c] * scale;
  }
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward_kernel);
    fftw_destroy_plan(forward_field);
    fftw_destroy_plan(backward);
  }
  return out;
}

}  // namespace kcs
