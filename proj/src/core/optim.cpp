#include "con2da/optim.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "con2da/errors.hpp"
#include "con2da/kernels.hpp"

namespace con2da {

void adam_step(Tensor& param, std::span<const double> grad, AdamState& state, double lr) {
  const std::size_t n = param.numel();
  if (grad.size() != n) {
    throw ContractViolation("adam_step: gradient has " + std::to_string(grad.size()) +
                            " entries, parameter has " + std::to_string(n));
  }
  if (state.first_moment.empty() && state.second_moment.empty() && state.step_count == 0) {
    state.first_moment.assign(n, 0.0);
    state.second_moment.assign(n, 0.0);
  }
  if (state.first_moment.size() != n || state.second_moment.size() != n) {
    throw ContractViolation("adam_step: moment buffers do not match the parameter shape");
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const kernels::AdamCoefficients coeff{
      .lr = lr,
      .beta1 = state.beta1,
      .beta2 = state.beta2,
      .epsilon = state.epsilon,
      .bias_correction1 = 1.0 - std::pow(state.beta1, t),
      .bias_correction2 = 1.0 - std::pow(state.beta2, t),
  };
  kernels::parallel::adam_update(param.mutable_values(), grad, state.first_moment,
                                 state.second_moment, coeff);
}

Adam::Adam(std::vector<Tensor> params, double beta1, double beta2, double epsilon)
    : params_(std::move(params)) {
  states_.resize(params_.size());
  for (AdamState& s : states_) {
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.epsilon = epsilon;
  }
}

void Adam::step(double lr) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].has_grad()) continue;
    adam_step(params_[i], params_[i].grad(), states_[i], lr);
  }
}

void Adam::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

double cosine_decay(const LrSchedule& schedule, std::uint64_t t) {
  if (schedule.total_iterations == 0) {
    throw ContractViolation("cosine_decay: total_iterations must be positive");
  }
  if (t > schedule.total_iterations) {
    throw ContractViolation("cosine_decay: iteration " + std::to_string(t) + " beyond " +
                            std::to_string(schedule.total_iterations));
  }
  const double progress = static_cast<double>(t) / static_cast<double>(schedule.total_iterations);
  return schedule.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace con2da
