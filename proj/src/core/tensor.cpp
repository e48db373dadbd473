#include "con2da/tensor.hpp"

#include <unordered_set>

#include "con2da/errors.hpp"

namespace con2da {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

namespace {
thread_local bool t_grad_enabled = true;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_enabled() { return t_grad_enabled; }

std::vector<double>& detail::Node::ensure_grad() {
  if (grad.empty()) grad.assign(values.size(), 0.0);
  return grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw ContractViolation("tensor: shape product " + std::to_string(shape_numel(shape)) +
                            " does not match value count " + std::to_string(values.size()));
  }
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->values = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, {value}); }

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
  return Tensor(Shape{rows, cols}, std::move(values), requires_grad);
}

Tensor Tensor::from_node(std::shared_ptr<detail::Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

const Shape& Tensor::shape() const {
  if (!node_) throw ContractViolation("tensor: use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw ContractViolation("tensor: axis " + std::to_string(axis) + " out of range for rank " +
                            std::to_string(s.size()));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::span<const double> Tensor::values() const {
  shape();
  return node_->values;
}

std::span<double> Tensor::mutable_values() {
  shape();
  return node_->values;
}

double Tensor::item() const {
  if (numel() != 1) throw ContractViolation("tensor: item() on a non-scalar tensor");
  return node_->values[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  if (rank() != 2 || row >= rows() || col >= cols()) {
    throw ContractViolation("tensor: at() index out of range");
  }
  return node_->values[row * cols() + col];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  shape();
  return node_->grad;
}

void Tensor::zero_grad() {
  shape();
  node_->grad.clear();
}

void Tensor::backward() const {
  if (numel() != 1) throw ContractViolation("backward: root must be a scalar");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS; `order` ends up topologically sorted (parents first).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->is_leaf()) continue;
    if (!node->grad.empty()) node->backward_fn(*node);
  }
  for (detail::Node* node : order) {
    if (node->is_leaf()) continue;
    node->parents.clear();
    node->backward_fn = nullptr;
  }
}

Tensor Tensor::detach() const { return Tensor(shape(), node_->values, false); }

Tensor Tensor::clone() const { return Tensor(shape(), node_->values, node_->requires_grad); }

}  // namespace con2da
