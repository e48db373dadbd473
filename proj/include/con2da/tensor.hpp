#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace con2da {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);

/// While alive, ops on this thread record no graph (evaluation-only forwards).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

namespace detail {

// One vertex of the differentiation graph. The graph is rebuilt on every forward pass;
// backward() walks it once and then releases the edges of every interior node.
struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const { return !backward_fn; }
  std::vector<double>& ensure_grad();
};

}  // namespace detail

/// Dense row-major array of doubles with optional reverse-mode gradient tracking.
///
/// Tensor is a shared handle: copies alias the same storage, like a framework tensor.
/// Leaves created with `requires_grad = true` accumulate gradients across backward()
/// calls until zero_grad(). Interior nodes exist only for the lifetime of one graph.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double value);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;
  std::size_t rows() const { return dim(0); }
  std::size_t cols() const { return dim(1); }

  std::span<const double> values() const;
  /// Direct write access; only meaningful for leaves (parameters, inputs).
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  /// Reverse sweep from this scalar. Consumes the graph: interior edges are dropped.
  void backward() const;

  /// Leaf copy of the current values that does not participate in differentiation.
  Tensor detach() const;
  /// Independent leaf with copied values and the same requires_grad flag.
  Tensor clone() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  static Tensor from_node(std::shared_ptr<detail::Node> node);

 private:
  std::shared_ptr<detail::Node> node_;
};

}  // namespace con2da
