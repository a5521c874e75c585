#include "reentry/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

#include "reentry/errors.hpp"

namespace reentry::ad {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

namespace {

void check_shape(const Shape& shape) {
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive");
  }
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  check_shape(shape);
  auto impl = std::make_shared<TensorImpl>();
  impl->value.assign(shape_size(shape), 0.0);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  check_shape(shape);
  if (shape_size(shape) != values.size()) {
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match shape size " + std::to_string(shape_size(shape)));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->value = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows,
                      bool requires_grad) {
  if (rows.size() == 0) throw ShapeError("matrix needs at least one row");
  const std::size_t cols = rows.begin()->size();
  std::vector<double> values;
  values.reserve(rows.size() * cols);
  for (const auto& row : rows) {
    if (row.size() != cols) throw ShapeError("ragged matrix literal");
    values.insert(values.end(), row.begin(), row.end());
  }
  return from({rows.size(), cols}, std::move(values), requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  const std::size_t n = values.size();
  return from({n}, std::move(values), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

std::size_t Tensor::rows() const {
  const auto& s = impl_->shape;
  if (s.size() <= 1) return 1;
  return s[0];
}

std::size_t Tensor::cols() const {
  const auto& s = impl_->shape;
  if (s.empty()) return 1;
  return s.back();
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on a tensor with " + std::to_string(size()) + " values");
  return impl_->value[0];
}

std::span<double> Tensor::grad_mut() { return grad_of(*impl_); }

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  auto impl = std::make_shared<TensorImpl>(*impl_);
  return Tensor(std::move(impl));
}

Tensor Tensor::detach() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->value = impl_->value;
  return Tensor(std::move(impl));
}

std::span<double> grad_of(TensorImpl& t) {
  if (t.grad.empty()) t.grad.assign(t.value.size(), 0.0);
  return t.grad;
}

void Tape::record(std::vector<Tensor> inputs, Tensor& output, BackwardFn backward) {
  if (!recording_) return;
  const bool tracked = std::any_of(inputs.begin(), inputs.end(),
                                   [](const Tensor& t) { return t.requires_grad(); });
  if (!tracked) return;
  output.set_requires_grad(true);
  Node node;
  node.inputs.reserve(inputs.size());
  for (auto& in : inputs) node.inputs.push_back(in.handle());
  node.output = output.handle();
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
}

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ShapeError("backward needs a scalar loss, got " + std::to_string(loss.size()) +
                     " values");
  }
  if (!loss.requires_grad()) {
    throw std::invalid_argument("loss does not depend on any tracked tensor");
  }
  grad_of(*loss.impl())[0] += 1.0;
  visited_ = 0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    // Unreached outputs never had a gradient written.
    if (it->output->grad.empty()) continue;
    it->backward();
    ++visited_;
  }
}

}  // namespace reentry::ad
