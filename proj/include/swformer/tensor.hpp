#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace swformer {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class GradSink;

// Backward closure of a recorded primitive. Receives the gradient with
// respect to the primitive's output and its forward value, and accumulates
// input gradients through the sink.
using BackwardFn =
    std::function<void(std::span<const double> out_grad, std::span<const double> out_value, GradSink& sink)>;

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty when absent
  bool requires_grad = false;
  std::uint64_t seq = 0;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;

  bool is_leaf() const { return !backward; }
  std::vector<double>& grad_buffer();
};

}  // namespace detail

// Dense row-major double-precision array. Copies share storage; an operation
// whose inputs require gradients records itself so that backward() can
// propagate through it.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return node_->values.size(); }

  std::span<const double> values() const { return node_->values; }
  // Only leaves may be mutated in place (parameters, inputs).
  std::span<double> mutable_values();

  double item() const;
  double operator[](std::size_t i) const { return node_->values[i]; }
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag);
  bool is_leaf() const { return node_->is_leaf(); }

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }

  // Same values, cut from the graph.
  Tensor detach() const;

  bool same_as(const Tensor& other) const { return node_ == other.node_; }
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  friend Tensor record_op(Shape, std::vector<double>, std::vector<Tensor>, BackwardFn);

  std::shared_ptr<detail::Node> node_;
};

// Accumulates into the gradients of a primitive's inputs during backward.
class GradSink {
 public:
  explicit GradSink(const std::vector<std::shared_ptr<detail::Node>>& inputs) : inputs_(inputs) {}

  bool wants(std::size_t input) const { return inputs_[input]->requires_grad; }
  std::span<double> grad(std::size_t input) { return inputs_[input]->grad_buffer(); }
  std::span<const double> values(std::size_t input) const { return inputs_[input]->values; }

 private:
  const std::vector<std::shared_ptr<detail::Node>>& inputs_;
};

// Builds the result of a primitive. The node joins the graph only when
// gradient recording is enabled and some input requires a gradient.
Tensor record_op(Shape shape, std::vector<double> values, std::vector<Tensor> inputs, BackwardFn backward);

bool grad_enabled();

// Disables graph recording for the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Reachable recorded primitives of a loss, inputs before outputs.
class GradTape {
 public:
  static GradTape record(const Tensor& loss);

  std::size_t size() const { return order_.size(); }
  const std::vector<detail::Node*>& nodes() const { return order_; }

  // Seeds d(loss)/d(loss) = 1 and visits every node once in reverse order.
  // Leaf gradients accumulate; intermediate gradients are released.
  void backward();

 private:
  std::shared_ptr<detail::Node> root_;
  std::vector<detail::Node*> order_;
};

void backward(const Tensor& loss);

}  // namespace swformer
