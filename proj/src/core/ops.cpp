#include "con2da/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "con2da/errors.hpp"
#include "con2da/kernels.hpp"

namespace con2da {

namespace {

using detail::Node;
using BackwardFn = std::function<void(Node&)>;

Tensor make_result(Shape shape, std::vector<double> values, std::initializer_list<Tensor> inputs,
                   BackwardFn backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  if (grad_enabled()) {
    for (const Tensor& in : inputs) node->requires_grad = node->requires_grad || in.requires_grad();
  }
  if (node->requires_grad) {
    for (const Tensor& in : inputs) node->parents.push_back(in.node());
    node->backward_fn = std::move(backward);
  }
  return Tensor::from_node(std::move(node));
}

// Adds `delta` into the parent's gradient buffer, taking ownership when the buffer is fresh.
void accumulate(Node& parent, std::vector<double>&& delta) {
  if (!parent.requires_grad) return;
  if (parent.grad.empty()) {
    parent.grad = std::move(delta);
    return;
  }
  for (std::size_t i = 0; i < delta.size(); ++i) parent.grad[i] += delta[i];
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ContractViolation(std::string(op) + ": expected rank " + std::to_string(rank) +
                            ", got " + std::to_string(t.rank()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) throw ContractViolation(std::string(op) + ": shape mismatch");
}

template <typename F>
Tensor elementwise_binary(const Tensor& a, const Tensor& b, const char* op, F f,
                          BackwardFn backward) {
  require_same_shape(a, b, op);
  std::vector<double> out(a.numel());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i], bv[i]);
  return make_result(a.shape(), std::move(out), {a, b}, std::move(backward));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise_binary(a, b, "add", [](double x, double y) { return x + y; },
                            [](Node& self) {
                              accumulate(*self.parents[0], std::vector<double>(self.grad));
                              accumulate(*self.parents[1], std::vector<double>(self.grad));
                            });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return elementwise_binary(a, b, "sub", [](double x, double y) { return x - y; },
                            [](Node& self) {
                              accumulate(*self.parents[0], std::vector<double>(self.grad));
                              std::vector<double> d(self.grad.size());
                              for (std::size_t i = 0; i < d.size(); ++i) d[i] = -self.grad[i];
                              accumulate(*self.parents[1], std::move(d));
                            });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return elementwise_binary(a, b, "mul", [](double x, double y) { return x * y; },
                            [](Node& self) {
                              const auto& av = self.parents[0]->values;
                              const auto& bv = self.parents[1]->values;
                              std::vector<double> da(av.size()), db(bv.size());
                              for (std::size_t i = 0; i < da.size(); ++i) {
                                da[i] = self.grad[i] * bv[i];
                                db[i] = self.grad[i] * av[i];
                              }
                              accumulate(*self.parents[0], std::move(da));
                              accumulate(*self.parents[1], std::move(db));
                            });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v *= factor;
  return make_result(a.shape(), std::move(out), {a}, [factor](Node& self) {
    std::vector<double> d(self.grad);
    for (double& v : d) v *= factor;
    accumulate(*self.parents[0], std::move(d));
  });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  return make_result(a.shape(), std::move(out), {a}, [](Node& self) {
    const auto& x = self.parents[0]->values;
    std::vector<double> d(x.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = x[i] > 0.0 ? self.grad[i] : 0.0;
    accumulate(*self.parents[0], std::move(d));
  });
}

Tensor add_row_vector(const Tensor& x, const Tensor& bias) {
  require_rank(x, 2, "add_row_vector");
  require_rank(bias, 1, "add_row_vector");
  const std::size_t m = x.rows(), n = x.cols();
  if (bias.dim(0) != n) throw ContractViolation("add_row_vector: bias length mismatch");
  std::vector<double> out(x.values().begin(), x.values().end());
  const auto bv = bias.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bv[j];
  }
  return make_result(x.shape(), std::move(out), {x, bias}, [m, n](Node& self) {
    if (self.parents[1]->requires_grad) {
      std::vector<double> db(n, 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) db[j] += self.grad[i * n + j];
      }
      accumulate(*self.parents[1], std::move(db));
    }
    accumulate(*self.parents[0], std::vector<double>(self.grad));
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ContractViolation("matmul: inner dimensions differ (" + std::to_string(k) + " vs " +
                            std::to_string(b.rows()) + ")");
  }
  std::vector<double> out(m * n);
  kernels::parallel::matmul(a.values(), b.values(), out, m, k, n);
  return make_result(Shape{m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      std::vector<double> da(m * k);
      kernels::parallel::matmul_nt(self.grad, pb.values, da, m, n, k);
      accumulate(pa, std::move(da));
    }
    if (pb.requires_grad) {
      std::vector<double> db(k * n);
      kernels::parallel::matmul_tn(pa.values, self.grad, db, k, m, n);
      accumulate(pb, std::move(db));
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  const auto av = a.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  }
  return make_result(Shape{n, m}, std::move(out), {a}, [m, n](Node& self) {
    std::vector<double> d(m * n);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) d[i * n + j] = self.grad[j * m + i];
    }
    accumulate(*self.parents[0], std::move(d));
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractViolation("concat_rows: no inputs");
  const std::size_t n = parts.front().cols();
  std::size_t m = 0;
  bool any_grad = false;
  for (const Tensor& p : parts) {
    require_rank(p, 2, "concat_rows");
    if (p.cols() != n) throw ContractViolation("concat_rows: column count mismatch");
    m += p.rows();
    any_grad = any_grad || p.requires_grad();
  }
  std::vector<double> out;
  out.reserve(m * n);
  for (const Tensor& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());

  auto node = std::make_shared<Node>();
  node->shape = {m, n};
  node->values = std::move(out);
  node->requires_grad = any_grad;
  if (any_grad) {
    for (const Tensor& p : parts) node->parents.push_back(p.node());
    node->backward_fn = [](Node& self) {
      std::size_t offset = 0;
      for (auto& parent : self.parents) {
        const std::size_t len = parent->values.size();
        if (parent->requires_grad) {
          accumulate(*parent, std::vector<double>(self.grad.begin() + offset,
                                                  self.grad.begin() + offset + len));
        }
        offset += len;
      }
    };
  }
  return Tensor::from_node(std::move(node));
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  require_rank(a, 2, "slice_rows");
  if (begin > end || end > a.rows()) throw ContractViolation("slice_rows: range out of bounds");
  const std::size_t n = a.cols();
  const std::size_t total = a.numel();
  std::vector<double> out(a.values().begin() + begin * n, a.values().begin() + end * n);
  return make_result(Shape{end - begin, n}, std::move(out), {a}, [begin, n, total](Node& self) {
    std::vector<double> d(total, 0.0);
    std::copy(self.grad.begin(), self.grad.end(), d.begin() + begin * n);
    accumulate(*self.parents[0], std::move(d));
  });
}

Tensor log_clamped(const Tensor& a, double floor, NumericDiagnostics* diag) {
  std::vector<double> out(a.numel());
  const auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (av[i] < floor) {
      out[i] = std::log(floor);
      if (diag) ++diag->clamp_count;
    } else {
      out[i] = std::log(av[i]);
    }
  }
  return make_result(a.shape(), std::move(out), {a}, [floor](Node& self) {
    const auto& x = self.parents[0]->values;
    std::vector<double> d(x.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = x[i] < floor ? 0.0 : self.grad[i] / x[i];
    accumulate(*self.parents[0], std::move(d));
  });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  const std::size_t n = a.numel();
  return make_result(Shape{}, {total}, {a}, [n](Node& self) {
    accumulate(*self.parents[0], std::vector<double>(n, self.grad[0]));
  });
}

Tensor mean(const Tensor& a) {
  const std::size_t n = a.numel();
  if (n == 0) throw ContractViolation("mean: empty tensor");
  double total = 0.0;
  for (double v : a.values()) total += v;
  return make_result(Shape{}, {total / static_cast<double>(n)}, {a}, [n](Node& self) {
    accumulate(*self.parents[0], std::vector<double>(n, self.grad[0] / static_cast<double>(n)));
  });
}

Tensor row_sum(const Tensor& a) {
  require_rank(a, 2, "row_sum");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m, 0.0);
  const auto av = a.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i] += av[i * n + j];
  }
  return make_result(Shape{m}, std::move(out), {a}, [m, n](Node& self) {
    std::vector<double> d(m * n);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) d[i * n + j] = self.grad[i];
    }
    accumulate(*self.parents[0], std::move(d));
  });
}

Tensor weighted_sum(const Tensor& a, std::span<const double> weights) {
  require_rank(a, 1, "weighted_sum");
  if (weights.size() != a.numel()) throw ContractViolation("weighted_sum: weight count mismatch");
  double total = 0.0;
  const auto av = a.values();
  for (std::size_t i = 0; i < av.size(); ++i) total += weights[i] * av[i];
  std::vector<double> w(weights.begin(), weights.end());
  return make_result(Shape{}, {total}, {a}, [w = std::move(w)](Node& self) {
    std::vector<double> d(w.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = w[i] * self.grad[0];
    accumulate(*self.parents[0], std::move(d));
  });
}

Tensor gather_columns(const Tensor& a, std::span<const std::size_t> index) {
  require_rank(a, 2, "gather_columns");
  const std::size_t m = a.rows(), n = a.cols();
  if (index.size() != m) throw ContractViolation("gather_columns: index count mismatch");
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (index[i] >= n) throw ContractViolation("gather_columns: column index out of range");
    out[i] = a.values()[i * n + index[i]];
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return make_result(Shape{m}, std::move(out), {a}, [m, n, idx = std::move(idx)](Node& self) {
    std::vector<double> d(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) d[i * n + idx[i]] = self.grad[i];
    accumulate(*self.parents[0], std::move(d));
  });
}

Tensor masked_logsumexp_rows(const Tensor& a, std::span<const std::uint8_t> mask) {
  require_rank(a, 2, "masked_logsumexp_rows");
  const std::size_t m = a.rows(), n = a.cols();
  if (mask.size() != m * n) throw ContractViolation("masked_logsumexp_rows: mask size mismatch");
  const auto av = a.values();
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (mask[i * n + j]) mx = std::max(mx, av[i * n + j]);
    }
    if (!std::isfinite(mx)) {
      throw ContractViolation("masked_logsumexp_rows: row " + std::to_string(i) +
                              " selects no entries");
    }
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask[i * n + j]) s += std::exp(av[i * n + j] - mx);
    }
    out[i] = mx + std::log(s);
  }
  std::vector<std::uint8_t> keep(mask.begin(), mask.end());
  return make_result(Shape{m}, std::move(out), {a}, [m, n, keep = std::move(keep)](Node& self) {
    const auto& x = self.parents[0]->values;
    // The node's own forward values are needed: out[i] is the log-normalizer.
    std::vector<double> d(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (keep[i * n + j]) d[i * n + j] = self.grad[i] * std::exp(x[i * n + j] - self.values[i]);
      }
    }
    accumulate(*self.parents[0], std::move(d));
  });
}

Tensor l2_normalize(const Tensor& v) {
  require_rank(v, 2, "l2_normalize");
  const std::size_t m = v.rows(), d = v.cols();
  const auto x = v.values();
  std::vector<double> out(m * d);
  std::vector<double> norms(m);
  for (std::size_t i = 0; i < m; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) sq += x[i * d + j] * x[i * d + j];
    const double r = std::sqrt(sq);
    if (!(r >= kMinRowNorm)) {
      throw DegenerateInput("l2_normalize: row " + std::to_string(i) + " has norm " +
                            std::to_string(r) + " below 1e-12");
    }
    norms[i] = r;
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = x[i * d + j] / r;
  }
  return make_result(v.shape(), std::move(out), {v}, [m, d, norms = std::move(norms)](Node& self) {
    // dv = (dz - z (z . dz)) / |v|
    const auto& z = self.values;
    std::vector<double> dv(m * d);
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += z[i * d + j] * self.grad[i * d + j];
      for (std::size_t j = 0; j < d; ++j) {
        dv[i * d + j] = (self.grad[i * d + j] - z[i * d + j] * dot) / norms[i];
      }
    }
    accumulate(*self.parents[0], std::move(dv));
  });
}

Tensor softmax_with_temperature(const Tensor& logits, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw InvalidHyperparameter("softmax_with_temperature: temperature must be positive, got " +
                                std::to_string(temperature));
  }
  require_rank(logits, 2, "softmax_with_temperature");
  const std::size_t m = logits.rows(), k = logits.cols();
  const auto x = logits.values();
  const double inv_t = 1.0 / temperature;
  std::vector<double> out(m * k);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, x[i * k + j] * inv_t);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      out[i * k + j] = std::exp(x[i * k + j] * inv_t - mx);
      s += out[i * k + j];
    }
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] /= s;
  }
  return make_result(logits.shape(), std::move(out), {logits}, [m, k, inv_t](Node& self) {
    // dx = (1/T) p * (dp - <dp, p>)
    const auto& p = self.values;
    std::vector<double> dx(m * k);
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < k; ++j) dot += self.grad[i * k + j] * p[i * k + j];
      for (std::size_t j = 0; j < k; ++j) {
        dx[i * k + j] = inv_t * p[i * k + j] * (self.grad[i * k + j] - dot);
      }
    }
    accumulate(*self.parents[0], std::move(dx));
  });
}

Tensor nll_per_sample(const Tensor& probs, std::span<const int> labels, NumericDiagnostics* diag) {
  require_rank(probs, 2, "nll_per_sample");
  const std::size_t m = probs.rows(), k = probs.cols();
  if (labels.size() != m) throw ContractViolation("nll_per_sample: label count mismatch");
  const auto p = probs.values();
  std::vector<double> out(m);
  std::vector<std::size_t> cols(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
      throw ContractViolation("nll_per_sample: label " + std::to_string(labels[i]) +
                              " outside [0, " + std::to_string(k) + ")");
    }
    cols[i] = static_cast<std::size_t>(labels[i]);
    const double q = p[i * k + cols[i]];
    if (q < kProbabilityFloor) {
      out[i] = -std::log(kProbabilityFloor);
      if (diag) ++diag->clamp_count;
    } else {
      out[i] = -std::log(q);
    }
  }
  return make_result(Shape{m}, std::move(out), {probs}, [m, k, cols = std::move(cols)](Node& self) {
    const auto& pv = self.parents[0]->values;
    std::vector<double> d(m * k, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const double q = pv[i * k + cols[i]];
      if (q >= kProbabilityFloor) d[i * k + cols[i]] = -self.grad[i] / q;
    }
    accumulate(*self.parents[0], std::move(d));
  });
}

Tensor cross_entropy(const Tensor& probs, std::span<const int> labels, NumericDiagnostics* diag) {
  return mean(nll_per_sample(probs, labels, diag));
}

}  // namespace con2da
