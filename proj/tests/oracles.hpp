#pragma once

// Reference implementations used only by the tests. They share no code with the library:
// plain loops in long double over std::vector, materializing every intermediate.

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<long double>>;

inline Matrix to_matrix(const std::vector<double>& flat, std::size_t rows, std::size_t cols) {
  Matrix m(rows, std::vector<long double>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) m[i][j] = flat[i * cols + j];
  }
  return m;
}

inline std::vector<long double> softmax(const std::vector<long double>& logits, long double t) {
  std::vector<long double> out(logits.size());
  long double denom = 0.0L;
  for (long double x : logits) denom += std::exp(x / t);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = std::exp(logits[i] / t) / denom;
  return out;
}

inline long double cross_entropy(const Matrix& p, const std::vector<int>& labels) {
  long double total = 0.0L;
  for (std::size_t i = 0; i < p.size(); ++i) total -= std::log(std::max(p[i][labels[i]], 1e-12L));
  return total / static_cast<long double>(p.size());
}

inline long double dot(const std::vector<long double>& a, const std::vector<long double>& b) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Every one of the 2N anchor terms written out separately, then averaged.
/// include_positive = false: denominator over the views of all other samples only.
/// include_positive = true: denominator over every view except the anchor itself.
inline long double ntxent(const Matrix& zw, const Matrix& zs, long double t, bool include_positive) {
  const std::size_t n = zw.size();
  long double total = 0.0L;
  for (int family = 0; family < 2; ++family) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto& anchor = family == 0 ? zw[i] : zs[i];
      const auto& partner = family == 0 ? zs[i] : zw[i];
      const long double numerator = std::exp(dot(zw[i], zs[i]) / t);
      long double denom = 0.0L;
      for (std::size_t a = 0; a < n; ++a) {
        if (a == i) continue;
        denom += std::exp(dot(anchor, zw[a]) / t);
        denom += std::exp(dot(anchor, zs[a]) / t);
      }
      if (include_positive) denom += std::exp(dot(anchor, partner) / t);
      total += -std::log(numerator / denom);
    }
  }
  return total / static_cast<long double>(2 * n);
}

inline long double entropy(const Matrix& p) {
  long double total = 0.0L;
  for (const auto& row : p) {
    for (long double v : row) total -= v * std::log(std::max(v, 1e-12L));
  }
  return total / static_cast<long double>(p.size());
}

/// Textbook Adam on one scalar, with m-hat / v-hat bias correction.
struct ScalarAdam {
  long double m = 0.0L, v = 0.0L;
  int t = 0;
  long double beta1 = 0.9L, beta2 = 0.999L, eps = 1e-8L;

  long double step(long double w, long double g, long double lr) {
    ++t;
    m = beta1 * m + (1.0L - beta1) * g;
    v = beta2 * v + (1.0L - beta2) * g * g;
    const long double m_hat = m / (1.0L - std::pow(beta1, t));
    const long double v_hat = v / (1.0L - std::pow(beta2, t));
    return w - lr * m_hat / (std::sqrt(v_hat) + eps);
  }
};

/// Weighted two-sample view of a matrix product, used to check the kernels.
inline std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b, std::size_t m,
                                  std::size_t k, std::size_t n) {
  std::vector<double> c(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      long double s = 0.0L;
      for (std::size_t p = 0; p < k; ++p) s += static_cast<long double>(a[i * k + p]) * b[p * n + j];
      c[i * n + j] = static_cast<double>(s);
    }
  }
  return c;
}

}  // namespace oracle
