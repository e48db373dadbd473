#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "con2da/ops.hpp"
#include "con2da/tensor.hpp"

namespace con2da {

/// (1/N) * sum_i [CE(p_weak_i, y_i) + CE(p_strong_i, y_i)].
Tensor supervised_loss(const Tensor& p_weak, const Tensor& p_strong, std::span<const int> labels,
                       NumericDiagnostics* diag = nullptr);

/// Which views the contrastive denominator sums over for the anchor of sample i.
/// negatives_only: the 2(N-1) views of every other sample (the positive pair is excluded).
/// simclr: every view except the anchor itself (the positive pair is included).
enum class NtXentDenominator { negatives_only, simclr };

std::string_view to_string(NtXentDenominator d);
NtXentDenominator parse_ntxent_denominator(std::string_view name);

/// NT-Xent over unit-norm view pairs, averaged over all 2N anchors.
/// Requires N >= 2 and rows of unit norm within 1e-6.
Tensor ntxent_loss(const Tensor& z_weak, const Tensor& z_strong, double temperature,
                   NtXentDenominator denominator = NtXentDenominator::negatives_only);

struct PseudoLabelBatch {
  std::vector<int> labels;
  std::vector<double> confidences;
  std::vector<std::uint8_t> mask;  // confidences[i] >= threshold
  double threshold = 0.0;

  double mask_fraction() const;
};

/// Argmax of the averaged two-view prediction, ties to the lowest class. Reads values
/// only, so nothing it produces carries a gradient.
PseudoLabelBatch pseudo_label(const Tensor& p_weak, const Tensor& p_strong, double threshold);

/// (1/N) * sum_i mask_i * [CE(p_weak_i, y_i) + CE(p_strong_i, y_i)] against the pseudo labels.
/// The divisor is the full batch size; masked samples contribute exactly zero.
Tensor self_supervised_loss(const Tensor& p_weak, const Tensor& p_strong,
                            const PseudoLabelBatch& pseudo, NumericDiagnostics* diag = nullptr);

/// Mean over rows of -sum_k p_ik log p_ik, with the probability floor inside the log.
Tensor entropy_loss(const Tensor& p, NumericDiagnostics* diag = nullptr);

}  // namespace con2da
