#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <vector>

namespace reentry::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);

struct TensorImpl {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until something writes a gradient
  bool requires_grad = false;
};

// Dense row-major fp64 array. Copies share storage; use clone() for a deep copy.
// Rank-1 tensors behave as a single row wherever an op needs a matrix.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t size() const { return impl_->value.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const { return impl_->value; }
  std::span<double> mutable_values() { return impl_->value; }
  double item() const;
  double at(std::size_t r, std::size_t c) const { return impl_->value[r * cols() + c]; }
  double operator[](std::size_t i) const { return impl_->value[i]; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool on) { impl_->requires_grad = on; }
  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const double> grad() const { return impl_->grad; }
  std::span<double> grad_mut();  // allocates a zero gradient on first use
  void zero_grad();

  Tensor clone() const;
  Tensor detach() const;  // same values, no gradient tracking, fresh storage

  TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl>& handle() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

// Records differentiable operations in execution order; backward() replays them in reverse.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  Tape() = default;
  // A non-recording tape evaluates ops without building a graph.
  explicit Tape(bool recording) : recording_(recording) {}
  bool recording() const noexcept { return recording_; }

  // Registers `output` as produced from `inputs`. Nothing is recorded when no
  // input requires a gradient; the output is then a constant.
  void record(std::vector<Tensor> inputs, Tensor& output, BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 and propagates. Gradients accumulate.
  void backward(const Tensor& loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // Number of backward rules executed by the last backward() call.
  std::size_t last_visit_count() const noexcept { return visited_; }

 private:
  struct Node {
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    std::shared_ptr<TensorImpl> output;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  std::size_t visited_ = 0;
  bool recording_ = true;
};

// Gradient buffer for `t`, allocated on demand. Used inside backward rules.
std::span<double> grad_of(TensorImpl& t);

}  // namespace reentry::ad
