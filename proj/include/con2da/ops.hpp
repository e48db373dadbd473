#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "con2da/tensor.hpp"

// Differentiable tensor operations. Every op records a backward closure when any input
// requires a gradient and is a plain computation otherwise.
namespace con2da {

/// Counters for numerically clamped quantities (e.g. log of a saturated probability).
struct NumericDiagnostics {
  std::size_t clamp_count = 0;
};

/// Floor applied before taking the log of a probability.
inline constexpr double kProbabilityFloor = 1e-12;
/// Rows with an L2 norm below this are rejected by l2_normalize.
inline constexpr double kMinRowNorm = 1e-12;

// -- elementwise / structural -------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor neg(const Tensor& a);
Tensor relu(const Tensor& a);
/// x[m,n] + bias[n] broadcast over rows.
Tensor add_row_vector(const Tensor& x, const Tensor& bias);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
/// log(max(x, floor)); entries below the floor get zero gradient and bump the counter.
Tensor log_clamped(const Tensor& a, double floor, NumericDiagnostics* diag = nullptr);

// -- reductions -----------------------------------------------------------------------------

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Per-row sum of a matrix: [m,n] -> [m].
Tensor row_sum(const Tensor& a);
/// sum_i weights[i] * a[i] over a vector; weights are constants.
Tensor weighted_sum(const Tensor& a, std::span<const double> weights);
/// out[i] = a[i, index[i]].
Tensor gather_columns(const Tensor& a, std::span<const std::size_t> index);
/// out[i] = log sum_{j : mask[i*n+j]} exp(a[i,j]). Every row needs at least one selected entry.
Tensor masked_logsumexp_rows(const Tensor& a, std::span<const std::uint8_t> mask);

// -- the named numeric-core operations --------------------------------------------------------

/// Rows scaled to unit L2 norm. Throws DegenerateInput for rows with norm < 1e-12.
Tensor l2_normalize(const Tensor& v);
/// Row-wise softmax(logits / temperature) with max subtraction.
Tensor softmax_with_temperature(const Tensor& logits, double temperature);
/// Per-sample negative log-likelihood -log(probs[i, labels[i]]) with the probability floor.
Tensor nll_per_sample(const Tensor& probs, std::span<const int> labels,
                      NumericDiagnostics* diag = nullptr);
/// Batch mean of nll_per_sample.
Tensor cross_entropy(const Tensor& probs, std::span<const int> labels,
                     NumericDiagnostics* diag = nullptr);

}  // namespace con2da
