#pragma once

#include <map>
#include <string>

#include "reentry/random.hpp"
#include "reentry/tensor.hpp"

namespace reentry {

// Named trainable tensors. Iteration order is the lexicographic name order,
// which fixes the order of every reduction over parameters.
class ParameterStore {
 public:
  // Registers a trainable tensor; names must be unique.
  ad::Tensor add(const std::string& name, ad::Tensor tensor);
  ad::Tensor uniform(const std::string& name, ad::Shape shape, double bound, Rng& rng);
  ad::Tensor zeros(const std::string& name, ad::Shape shape);

  const ad::Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return tensors_.contains(name); }

  const std::map<std::string, ad::Tensor>& all() const noexcept { return tensors_; }
  std::size_t scalar_count() const;
  // Allocates and zeroes every gradient buffer.
  void zero_grad();
  double grad_norm() const;

  // Deep copy of every value (gradients are not copied).
  ParameterStore snapshot() const;
  // Copies values from `other`, which must hold the same names and shapes.
  void assign(const ParameterStore& other);

 private:
  std::map<std::string, ad::Tensor> tensors_;
};

}  // namespace reentry
