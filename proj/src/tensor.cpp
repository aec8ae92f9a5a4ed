#include "swformer/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

#include "swformer/error.hpp"

namespace swformer {

namespace {

std::atomic<std::uint64_t> next_seq{1};
thread_local bool recording_enabled = true;

std::shared_ptr<detail::Node> make_node(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor shape " + shape_str(shape) + " does not match " + std::to_string(values.size()) +
                         " values");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  node->seq = next_seq.fetch_add(1, std::memory_order_relaxed);
  return node;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

std::vector<double>& detail::Node::grad_buffer() {
  if (grad.empty()) grad.assign(values.size(), 0.0);
  return grad;
}

Tensor::Tensor() : node_(make_node(Shape{0}, {}, false)) {}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : node_(make_node(std::move(shape), std::move(values), requires_grad)) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor(Shape{}, {value}, requires_grad); }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
  return node_->shape[axis];
}

std::span<double> Tensor::mutable_values() {
  if (!is_leaf()) throw ContractError("cannot mutate the values of a recorded tensor");
  return node_->values;
}

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  return node_->values[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  if (rank() != 2) throw DimensionError("at(row, col) on tensor of shape " + shape_str(shape()));
  return node_->values[row * node_->shape[1] + col];
}

void Tensor::set_requires_grad(bool flag) {
  if (!is_leaf()) throw ContractError("requires_grad can only be set on leaves");
  node_->requires_grad = flag;
}

Tensor Tensor::detach() const { return Tensor(shape(), node_->values, false); }

Tensor record_op(Shape shape, std::vector<double> values, std::vector<Tensor> inputs, BackwardFn backward) {
  auto node = make_node(std::move(shape), std::move(values), false);
  if (!recording_enabled) return Tensor(std::move(node));
  const bool any = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return Tensor(std::move(node));
  node->requires_grad = true;
  node->inputs.reserve(inputs.size());
  for (auto& t : inputs) node->inputs.push_back(t.node());
  node->backward = std::move(backward);
  return Tensor(std::move(node));
}

bool grad_enabled() { return recording_enabled; }

NoGradGuard::NoGradGuard() : previous_(recording_enabled) { recording_enabled = false; }
NoGradGuard::~NoGradGuard() { recording_enabled = previous_; }

GradTape GradTape::record(const Tensor& loss) {
  GradTape tape;
  tape.root_ = loss.node();
  std::unordered_set<detail::Node*> seen;
  std::vector<detail::Node*> stack{loss.node().get()};
  while (!stack.empty()) {
    auto* node = stack.back();
    stack.pop_back();
    if (!node->requires_grad || node->is_leaf() || !seen.insert(node).second) continue;
    tape.order_.push_back(node);
    for (auto& in : node->inputs) stack.push_back(in.get());
  }
  // Sequence numbers grow with creation, so ascending order is topological.
  std::sort(tape.order_.begin(), tape.order_.end(),
            [](const detail::Node* a, const detail::Node* b) { return a->seq < b->seq; });
  return tape;
}

void GradTape::backward() {
  if (root_->values.size() != 1) {
    throw ContractError("backward() requires a scalar loss, got shape " + shape_str(root_->shape));
  }
  if (!root_->requires_grad) return;
  root_->grad_buffer()[0] += 1.0;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    auto* node = *it;
    if (node->grad.empty()) continue;
    GradSink sink(node->inputs);
    node->backward(node->grad, node->values, sink);
    if (node != root_.get()) {
      node->grad.clear();
      node->grad.shrink_to_fit();
    }
  }
}

void backward(const Tensor& loss) { GradTape::record(loss).backward(); }

}  // namespace swformer
