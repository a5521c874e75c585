#include "reentry/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "reentry/errors.hpp"

namespace reentry::ad {

namespace {

double evaluate(const ScalarFn& f) {
  Tape tape;
  const Tensor y = f(tape);
  if (y.size() != 1) throw ShapeError("grad_check: function is not scalar-valued");
  return y.item();
}

}  // namespace

GradCheckReport grad_check(const ScalarFn& f, const std::vector<Tensor>& inputs, double eps,
                           double tol) {
  if (!(eps > 0.0)) throw std::invalid_argument("grad_check: eps must be positive");
  std::vector<Tensor> xs = inputs;
  std::vector<bool> previously_tracked;
  for (auto& x : xs) {
    previously_tracked.push_back(x.requires_grad());
    x.set_requires_grad(true);
    x.zero_grad();
  }

  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    const Tensor y = f(tape);
    if (y.size() != 1) throw ShapeError("grad_check: function is not scalar-valued");
    tape.backward(y);
    for (auto& x : xs) {
      if (x.has_grad()) {
        analytic.emplace_back(x.grad().begin(), x.grad().end());
      } else {
        analytic.emplace_back(x.size(), 0.0);
      }
      x.zero_grad();
    }
  }

  GradCheckReport report;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    auto values = xs[k].mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + eps;
      const double up = evaluate(f);
      values[i] = original - eps;
      const double down = evaluate(f);
      values[i] = original;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / denom;
      const double noise = kGradCheckNoiseUlps * std::numeric_limits<double>::epsilon() *
                           std::max(std::abs(up), std::abs(down)) / (2.0 * eps);
      report.max_abs_err = std::max(report.max_abs_err, abs_err);
      report.noise_floor = std::max(report.noise_floor, noise);
      const bool relative_ok = rel <= tol;
      const bool noise_ok = abs_err <= tol * std::max(std::abs(a), std::abs(numeric)) + noise;
      if (!noise_ok) report.within_noise = false;
      if (!relative_ok && noise_ok) ++report.below_noise;
      ++report.coordinates;
      if (rel > report.max_rel_err || report.coordinates == 1) {
        report.max_rel_err = std::max(report.max_rel_err, rel);
        report.worst_input = k;
        report.worst_offset = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  for (std::size_t k = 0; k < xs.size(); ++k) {
    xs[k].set_requires_grad(previously_tracked[k]);
  }
  report.pass = report.max_rel_err <= tol;
  return report;
}

GradCheckReport grad_check(const ScalarFn& f, const Tensor& x, double eps, double tol) {
  return grad_check(f, std::vector<Tensor>{x}, eps, tol);
}

}  // namespace reentry::ad
