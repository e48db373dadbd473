#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "con2da/kernels.hpp"

namespace con2da::kernels::parallel {

namespace {

// Output tile held in registers for the whole reduction over p: kTileRows rows by
// kTileCols columns. Each element still accumulates its products in ascending p, starting
// from zero, which is exactly the serial order. The matching kTileCols-wide column panel
// of b is packed contiguously first; read in place, its rows sit n doubles apart and
// alias the same cache sets whenever n is a power of two.
constexpr std::size_t kTileRows = 4;
constexpr std::size_t kTileCols = 16;
// Below this many multiply-adds the fork/join costs more than it saves.
constexpr std::size_t kParallelWork = 1u << 15;

// Full tile: rows [i0, i0 + kTileRows), columns [j0, j0 + kTileCols).
template <typename AAt>
inline void full_tile(AAt a_at, const double* panel, double* c, std::size_t i0, std::size_t j0,
                      std::size_t k, std::size_t n) {
  double acc[kTileRows][kTileCols] = {};
  for (std::size_t p = 0; p < k; ++p) {
    const double* brow = panel + p * kTileCols;
#pragma GCC unroll 4
    for (std::size_t r = 0; r < kTileRows; ++r) {
      const double s = a_at(i0 + r, p);
#pragma omp simd
      for (std::size_t j = 0; j < kTileCols; ++j) acc[r][j] = std::fma(s, brow[j], acc[r][j]);
    }
  }
  for (std::size_t r = 0; r < kTileRows; ++r) {
    std::copy(acc[r], acc[r] + kTileCols, c + (i0 + r) * n + j0);
  }
}

// Ragged tile at the right or bottom edge.
template <typename AAt>
inline void edge_tile(AAt a_at, const double* panel, double* c, std::size_t i0, std::size_t rows,
                      std::size_t j0, std::size_t cols, std::size_t k, std::size_t n) {
  double acc[kTileRows][kTileCols] = {};
  for (std::size_t p = 0; p < k; ++p) {
    const double* brow = panel + p * kTileCols;
    for (std::size_t r = 0; r < rows; ++r) {
      const double s = a_at(i0 + r, p);
      for (std::size_t j = 0; j < cols; ++j) acc[r][j] = std::fma(s, brow[j], acc[r][j]);
    }
  }
  for (std::size_t r = 0; r < rows; ++r) std::copy(acc[r], acc[r] + cols, c + (i0 + r) * n + j0);
}

// c = op(a) * op(b) with op(a)[i, p] read through `a_at(i, p)` and op(b)[p, j] through
// `b_at(p, j)`.
template <typename AAt, typename BAt>
void tiled_matmul(AAt a_at, BAt b_at, std::span<double> c, std::size_t m, std::size_t k,
                  std::size_t n) {
  const std::size_t row_tiles = (m + kTileRows - 1) / kTileRows;
  const auto col_tiles = static_cast<std::int64_t>((n + kTileCols - 1) / kTileCols);
#pragma omp parallel if (m * k * n >= kParallelWork)
  {
    std::vector<double> panel(k * kTileCols);
#pragma omp for schedule(static)
    for (std::int64_t jt = 0; jt < col_tiles; ++jt) {
      const std::size_t j0 = static_cast<std::size_t>(jt) * kTileCols;
      const std::size_t cols = std::min(kTileCols, n - j0);
      for (std::size_t p = 0; p < k; ++p) {
        for (std::size_t j = 0; j < cols; ++j) panel[p * kTileCols + j] = b_at(p, j0 + j);
      }
      for (std::size_t it = 0; it < row_tiles; ++it) {
        const std::size_t i0 = it * kTileRows;
        const std::size_t rows = std::min(kTileRows, m - i0);
        if (rows == kTileRows && cols == kTileCols) {
          full_tile(a_at, panel.data(), c.data(), i0, j0, k, n);
        } else {
          edge_tile(a_at, panel.data(), c.data(), i0, rows, j0, cols, k, n);
        }
      }
    }
  }
}

}  // namespace

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  tiled_matmul([&a, k](std::size_t i, std::size_t p) { return a[i * k + p]; },
               [&b, n](std::size_t p, std::size_t j) { return b[p * n + j]; }, c, m, k, n);
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
  tiled_matmul([&a, m](std::size_t i, std::size_t p) { return a[p * m + i]; },
               [&b, n](std::size_t p, std::size_t j) { return b[p * n + j]; }, c, m, k, n);
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
  tiled_matmul([&a, k](std::size_t i, std::size_t p) { return a[i * k + p]; },
               [&b, k](std::size_t p, std::size_t j) { return b[j * k + p]; }, c, m, k, n);
}

void adam_update(std::span<double> param, std::span<const double> grad,
                 std::span<double> first_moment, std::span<double> second_moment,
                 const AdamCoefficients& coeff) {
  const auto size = static_cast<std::int64_t>(param.size());
#pragma omp parallel for simd schedule(static) if (param.size() >= kParallelWork)
  for (std::int64_t i = 0; i < size; ++i) {
    const double g = grad[i];
    first_moment[i] = coeff.beta1 * first_moment[i] + (1.0 - coeff.beta1) * g;
    second_moment[i] = coeff.beta2 * second_moment[i] + (1.0 - coeff.beta2) * g * g;
    const double m_hat = first_moment[i] / coeff.bias_correction1;
    const double v_hat = second_moment[i] / coeff.bias_correction2;
    param[i] -= coeff.lr * m_hat / (std::sqrt(v_hat) + coeff.epsilon);
  }
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace con2da::kernels::parallel
