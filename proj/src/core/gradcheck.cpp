#include "con2da/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "con2da/errors.hpp"

namespace con2da {

namespace {
constexpr double kRelativeFloor = 1e-6;
}

GradCheckReport check_gradients(const std::function<Tensor()>& loss_fn,
                                std::span<Tensor> params, double step, double tolerance) {
  if (!(step >= 1e-6 && step <= 1e-2)) {
    throw ContractViolation("check_gradients: step must lie in [1e-6, 1e-2]");
  }
  for (Tensor& p : params) p.zero_grad();
  loss_fn().backward();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const Tensor& p : params) {
    if (p.has_grad()) {
      analytic.emplace_back(p.grad().begin(), p.grad().end());
    } else {
      analytic.emplace_back(p.numel(), 0.0);
    }
  }

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi];
    ParamCheck check{.index = pi, .numel = p.numel()};
    auto values = p.mutable_values();
    for (std::size_t e = 0; e < values.size(); ++e) {
      const double original = values[e];
      values[e] = original + step;
      const double up = loss_fn().item();
      values[e] = original - step;
      const double down = loss_fn().item();
      values[e] = original;

      const double numeric = (up - down) / (2.0 * step);
      const double exact = analytic[pi][e];
      const double abs_err = std::abs(exact - numeric);
      const double denom = std::max({std::abs(exact), std::abs(numeric), kRelativeFloor});
      check.max_absolute_error = std::max(check.max_absolute_error, abs_err);
      check.max_relative_error = std::max(check.max_relative_error, abs_err / denom);
    }
    report.max_relative_error = std::max(report.max_relative_error, check.max_relative_error);
    report.params.push_back(check);
  }
  for (Tensor& p : params) p.zero_grad();
  report.passed = report.max_relative_error < tolerance;
  return report;
}

}  // namespace con2da
