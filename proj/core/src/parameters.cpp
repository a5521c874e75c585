#include "reentry/parameters.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "reentry/errors.hpp"

namespace reentry {

ad::Tensor ParameterStore::add(const std::string& name, ad::Tensor tensor) {
  tensor.set_requires_grad(true);
  if (!tensors_.emplace(name, tensor).second) {
    throw std::invalid_argument("duplicate parameter name '" + name + "'");
  }
  return tensor;
}

ad::Tensor ParameterStore::uniform(const std::string& name, ad::Shape shape, double bound, Rng& rng) {
  ad::Tensor t = ad::Tensor::zeros(std::move(shape));
  for (double& v : t.mutable_values()) v = rng.uniform(-bound, bound);
  return add(name, t);
}

ad::Tensor ParameterStore::zeros(const std::string& name, ad::Shape shape) {
  return add(name, ad::Tensor::zeros(std::move(shape)));
}

const ad::Tensor& ParameterStore::get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return it->second;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors_) n += t.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [name, t] : tensors_) {
    auto g = t.grad_mut();
    std::fill(g.begin(), g.end(), 0.0);
  }
}

double ParameterStore::grad_norm() const {
  double total = 0.0;
  for (const auto& [name, t] : tensors_) {
    for (double g : t.grad()) total += g * g;
  }
  return std::sqrt(total);
}

ParameterStore ParameterStore::snapshot() const {
  ParameterStore copy;
  for (const auto& [name, t] : tensors_) copy.add(name, t.detach());
  return copy;
}

void ParameterStore::assign(const ParameterStore& other) {
  if (other.tensors_.size() != tensors_.size()) throw ShapeError("parameter sets differ in size");
  for (auto& [name, t] : tensors_) {
    const ad::Tensor& src = other.get(name);
    if (src.shape() != t.shape()) throw ShapeError("parameter '" + name + "' changed shape");
    auto dst = t.mutable_values();
    std::copy(src.values().begin(), src.values().end(), dst.begin());
  }
}

}  // namespace reentry
