// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef IFASNET_GRADCHECK_H_
#define IFASNET_GRADCHECK_H_

#include <functional>
#include <string>
#include <vector>

#include "ifasnet/tensor.h"

namespace ifasnet {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Added to |fd| in the relative error denominator.
  double epsilon = 1e-12;
  // When positive, a coordinate that misses `tolerance` is re-estimated with
  // a five-point stencil at this step and passes if that estimate agrees.
  // Separates round-off in f (which the wider stencil suppresses) from wrong
  // derivatives (which it does not).
  double confirm_step = 0.0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  // Parameter and coordinate of the worst relative error.
  size_t worst_tensor = 0;
  int64_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  int64_t coordinates = 0;
  // Coordinates that missed the central estimate but passed confirmation,
  // and the worst relative error after confirmation.
  int64_t confirmed = 0;
  double max_confirmed_error = 0.0;
  bool passed = false;

  std::string Summary() const;
};

// Compares reverse-mode gradients of the scalar `f()` with respect to every
// coordinate of `params` against central differences. Parameter values are
// perturbed in place and restored. Resets the calling thread's tape.
GradCheckReport CheckGradients(const std::function<Tensor()> &f,
                               std::vector<Tensor> params,
                               const GradCheckOptions &options = {});

// Single-input form: f(x) with x treated as the only variable.
GradCheckReport CheckGradients(const std::function<Tensor(const Tensor &)> &f,
                               const Tensor &x,
                               const GradCheckOptions &options = {});

}  // namespace ifasnet

#endif  // IFASNET_GRADCHECK_H_
