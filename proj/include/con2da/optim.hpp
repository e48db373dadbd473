#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "con2da/tensor.hpp"

namespace con2da {

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update of `param` in place. Moment buffers are zero-initialised
/// on first use; afterwards they must match the parameter size exactly.
void adam_step(Tensor& param, std::span<const double> grad, AdamState& state, double lr);

/// Adam over a fixed parameter list, one state per tensor.
class Adam {
 public:
  Adam(std::vector<Tensor> params, double beta1 = 0.9, double beta2 = 0.999,
       double epsilon = 1e-8);

  /// Applies one step to every parameter that received a gradient since the last
  /// zero_grad(). Parameters the loss never reached are left untouched.
  void step(double lr);
  void zero_grad();

  const std::vector<Tensor>& params() const { return params_; }
  const std::vector<AdamState>& states() const { return states_; }

 private:
  std::vector<Tensor> params_;
  std::vector<AdamState> states_;
};

struct LrSchedule {
  double base_lr = 0.00008;
  std::uint64_t total_iterations = 5000;
};

/// base_lr * 0.5 * (1 + cos(pi * t / total_iterations)), decaying to exactly 0 at the end.
double cosine_decay(const LrSchedule& schedule, std::uint64_t t);

}  // namespace con2da
