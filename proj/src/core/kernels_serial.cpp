#include <cmath>

#include "con2da/kernels.hpp"

namespace con2da::kernels::serial {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc = std::fma(a[i * k + p], b[p * n + j], acc);
      c[i * n + j] = acc;
    }
  }
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc = std::fma(a[p * m + i], b[p * n + j], acc);
      c[i * n + j] = acc;
    }
  }
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc = std::fma(a[i * k + p], b[j * k + p], acc);
      c[i * n + j] = acc;
    }
  }
}

void adam_update(std::span<double> param, std::span<const double> grad,
                 std::span<double> first_moment, std::span<double> second_moment,
                 const AdamCoefficients& coeff) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    first_moment[i] = coeff.beta1 * first_moment[i] + (1.0 - coeff.beta1) * g;
    second_moment[i] = coeff.beta2 * second_moment[i] + (1.0 - coeff.beta2) * g * g;
    const double m_hat = first_moment[i] / coeff.bias_correction1;
    const double v_hat = second_moment[i] / coeff.bias_correction2;
    param[i] -= coeff.lr * m_hat / (std::sqrt(v_hat) + coeff.epsilon);
  }
}

}  // namespace con2da::kernels::serial
