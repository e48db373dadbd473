#pragma once

#include <functional>
#include <span>
#include <vector>

#include "con2da/tensor.hpp"

namespace con2da {

struct ParamCheck {
  std::size_t index = 0;  // position in the checked parameter list
  std::size_t numel = 0;
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  double max_relative_error = 0.0;
  bool passed = false;
};

/// Compares reverse-mode gradients of `loss_fn` against central finite differences
/// (f(p+h) - f(p-h)) / 2h, element by element, for every tensor in `params`.
///
/// `loss_fn` must read the parameters through the same handles it is given here; the
/// check perturbs their values in place and restores them afterwards. The relative
/// error of one element is |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
GradCheckReport check_gradients(const std::function<Tensor()>& loss_fn,
                                std::span<Tensor> params, double step, double tolerance);

}  // namespace con2da
