#include "con2da/losses.hpp"

#include <array>
#include <cmath>
#include <string>

#include "con2da/errors.hpp"

namespace con2da {

namespace {

void require_distributions(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rank() != 2 || a.shape() != b.shape()) {
    throw ContractViolation(std::string(op) + ": views must be [N, K] matrices of the same shape");
  }
}

}  // namespace

Tensor supervised_loss(const Tensor& p_weak, const Tensor& p_strong, std::span<const int> labels,
                       NumericDiagnostics* diag) {
  require_distributions(p_weak, p_strong, "supervised_loss");
  return add(cross_entropy(p_weak, labels, diag), cross_entropy(p_strong, labels, diag));
}

std::string_view to_string(NtXentDenominator d) {
  return d == NtXentDenominator::negatives_only ? "negatives_only" : "simclr";
}

NtXentDenominator parse_ntxent_denominator(std::string_view name) {
  if (name == "negatives_only") return NtXentDenominator::negatives_only;
  if (name == "simclr") return NtXentDenominator::simclr;
  throw ConfigError("ntxent_denominator must be 'negatives_only' or 'simclr', got '" + std::string(name) + "'");
}

Tensor ntxent_loss(const Tensor& z_weak, const Tensor& z_strong, double temperature,
                   NtXentDenominator denominator) {
  if (!(temperature > 0.0)) throw InvalidHyperparameter("ntxent_loss: temperature must be > 0");
  if (z_weak.rank() != 2 || z_weak.shape() != z_strong.shape()) {
    throw ContractViolation("ntxent_loss: views must be [N, d] matrices of the same shape");
  }
  const std::size_t n = z_weak.rows();
  if (n < 2) throw ContractViolation("ntxent_loss: needs N >= 2 so every anchor has negatives");
  const std::size_t d = z_weak.cols();
  for (const Tensor* z : {&z_weak, &z_strong}) {
    const auto v = z->values();
    for (std::size_t i = 0; i < n; ++i) {
      double sq = 0.0;
      for (std::size_t j = 0; j < d; ++j) sq += v[i * d + j] * v[i * d + j];
      if (std::abs(std::sqrt(sq) - 1.0) > 1e-6) {
        throw ContractViolation("ntxent_loss: row " + std::to_string(i) + " is not unit norm");
      }
    }
  }

  // Rows 0..N-1 are weak views, N..2N-1 strong views; row r's positive is (r + N) mod 2N.
  const std::array<Tensor, 2> parts{z_weak, z_strong};
  const Tensor z = concat_rows(parts);
  const Tensor logits = scale(matmul(z, transpose(z)), 1.0 / temperature);
  const std::size_t m = 2 * n;
  std::vector<std::uint8_t> mask(m * m, 1);
  std::vector<std::size_t> positive(m);
  for (std::size_t r = 0; r < m; ++r) {
    positive[r] = (r + n) % m;
    mask[r * m + r] = 0;
    if (denominator == NtXentDenominator::negatives_only) mask[r * m + positive[r]] = 0;
  }
  const Tensor per_anchor = sub(masked_logsumexp_rows(logits, mask), gather_columns(logits, positive));
  return mean(per_anchor);
}

double PseudoLabelBatch::mask_fraction() const {
  if (mask.empty()) return 0.0;
  std::size_t on = 0;
  for (std::uint8_t m : mask) on += m;
  return static_cast<double>(on) / static_cast<double>(mask.size());
}

PseudoLabelBatch pseudo_label(const Tensor& p_weak, const Tensor& p_strong, double threshold) {
  require_distributions(p_weak, p_strong, "pseudo_label");
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw InvalidHyperparameter("pseudo_label: threshold must lie in (0, 1]");
  }
  const std::size_t n = p_weak.rows(), k = p_weak.cols();
  const auto w = p_weak.values();
  const auto s = p_strong.values();
  PseudoLabelBatch out;
  out.threshold = threshold;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    double best_p = (w[i * k] + s[i * k]) / 2.0;
    for (std::size_t c = 1; c < k; ++c) {
      const double p = (w[i * k + c] + s[i * k + c]) / 2.0;
      if (p > best_p) {
        best_p = p;
        best = c;
      }
    }
    out.labels.push_back(static_cast<int>(best));
    out.confidences.push_back(best_p);
    out.mask.push_back(best_p >= threshold ? 1 : 0);
  }
  return out;
}

Tensor self_supervised_loss(const Tensor& p_weak, const Tensor& p_strong,
                            const PseudoLabelBatch& pseudo, NumericDiagnostics* diag) {
  require_distributions(p_weak, p_strong, "self_supervised_loss");
  const std::size_t n = p_weak.rows();
  if (pseudo.labels.size() != n || pseudo.mask.size() != n) {
    throw ContractViolation("self_supervised_loss: pseudo-label batch does not match the views");
  }
  const Tensor per_sample = add(nll_per_sample(p_weak, pseudo.labels, diag),
                                nll_per_sample(p_strong, pseudo.labels, diag));
  std::vector<double> weights(n);
  for (std::size_t i = 0; i < n; ++i) weights[i] = pseudo.mask[i] ? 1.0 / static_cast<double>(n) : 0.0;
  return weighted_sum(per_sample, weights);
}

Tensor entropy_loss(const Tensor& p, NumericDiagnostics* diag) {
  if (p.rank() != 2 || p.rows() == 0) throw ContractViolation("entropy_loss: expected a non-empty [N, K] matrix");
  return neg(mean(row_sum(mul(p, log_clamped(p, kProbabilityFloor, diag)))));
}

}  // namespace con2da
