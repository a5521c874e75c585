#pragma once

#include <functional>
#include <string>
#include <vector>

#include "reentry/tensor.hpp"

namespace reentry::ad {

struct GradCheckReport {
  double max_rel_err = 0.0;
  bool pass = true;
  std::size_t coordinates = 0;
  // Location of the worst coordinate: index into the checked inputs and flat offset.
  std::size_t worst_input = 0;
  std::size_t worst_offset = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;

  // Central differences cannot resolve f below a few ulps, so the numeric
  // derivative carries noise of order ulp(f) / eps. `within_noise` accepts a
  // coordinate when |a - n| <= tol * max(|a|, |n|) + that noise.
  double max_abs_err = 0.0;
  double noise_floor = 0.0;  // largest per-coordinate noise allowance
  bool within_noise = true;
  std::size_t below_noise = 0;  // coordinates failing the relative test but within noise
};

// Number of ulps of |f| allowed as finite-difference noise.
inline constexpr double kGradCheckNoiseUlps = 16.0;

// Builds a fresh tape for every evaluation and returns a scalar tensor.
using ScalarFn = std::function<Tensor(Tape&)>;

// Compares backward() against central differences on every coordinate of
// `inputs`. Relative error uses max(|analytic|, |numeric|, 1e-8) as denominator.
GradCheckReport grad_check(const ScalarFn& f, const std::vector<Tensor>& inputs, double eps,
                           double tol);

GradCheckReport grad_check(const ScalarFn& f, const Tensor& x, double eps, double tol);

}  // namespace reentry::ad
