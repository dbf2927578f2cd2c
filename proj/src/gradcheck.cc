// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ifasnet/gradcheck.h"

#include <cmath>
#include <sstream>

namespace ifasnet {

std::string GradCheckReport::Summary() const {
  std::ostringstream os;
  os << (passed ? "pass" : "FAIL") << " coords=" << coordinates
     << " max_rel=" << max_relative_error << " max_abs=" << max_absolute_error
     << " worst=(" << worst_tensor << "," << worst_index
     << ") analytic=" << worst_analytic << " numeric=" << worst_numeric;
  if (confirmed > 0) {
    os << " confirmed=" << confirmed << " max_confirmed=" << max_confirmed_error;
  }
  return os.str();
}

GradCheckReport CheckGradients(const std::function<Tensor()> &f,
                               std::vector<Tensor> params,
                               const GradCheckOptions &options) {
  Tape &tape = CurrentTape();
  tape.Reset();
  std::vector<bool> previous;
  for (Tensor &p : params) {
    previous.push_back(p.requires_grad());
    p.set_requires_grad(true);
    p.ZeroGrad();
  }
  Tensor loss = f();
  if (loss.numel() != 1) {
    tape.Reset();
    throw ShapeError("gradient check needs a scalar function, got " +
                     ShapeString(loss.shape()));
  }
  tape.Backward(loss);
  std::vector<std::vector<double>> analytic;
  for (const Tensor &p : params) analytic.push_back(p.grad());
  tape.Reset();

  GradCheckReport report;
  {
    NoGradScope no_grad;
    for (size_t t = 0; t < params.size(); ++t) {
      auto values = params[t].mutable_data();
      for (size_t i = 0; i < values.size(); ++i) {
        const double original = values[i];
        values[i] = original + options.step;
        const double plus = f().item();
        values[i] = original - options.step;
        const double minus = f().item();
        values[i] = original;
        const double fd = (plus - minus) / (2.0 * options.step);
        if (!std::isfinite(fd)) {
          throw NumericError("non-finite finite-difference estimate");
        }
        const double abs_err = std::abs(analytic[t][i] - fd);
        const double rel_err = abs_err / (std::abs(fd) + options.epsilon);
        double effective = rel_err;
        if (rel_err > options.tolerance && options.confirm_step > 0.0) {
          const double h = options.confirm_step;
          auto at = [&](double offset) {
            values[i] = original + offset;
            const double y = f().item();
            values[i] = original;
            return y;
          };
          const double fd5 = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
          effective = std::abs(analytic[t][i] - fd5) / (std::abs(fd5) + options.epsilon);
          if (effective <= options.tolerance) ++report.confirmed;
        }
        report.max_confirmed_error = std::max(report.max_confirmed_error, effective);
        report.max_absolute_error = std::max(report.max_absolute_error, abs_err);
        if (rel_err > report.max_relative_error || report.coordinates == 0) {
          report.max_relative_error = rel_err;
          report.worst_tensor = t;
          report.worst_index = static_cast<int64_t>(i);
          report.worst_analytic = analytic[t][i];
          report.worst_numeric = fd;
        }
        ++report.coordinates;
      }
    }
  }
  for (size_t t = 0; t < params.size(); ++t) {
    params[t].ZeroGrad();
    params[t].set_requires_grad(previous[t]);
  }
  report.passed = (options.confirm_step > 0.0 ? report.max_confirmed_error
                                               : report.max_relative_error) <= options.tolerance;
  return report;
}

GradCheckReport CheckGradients(const std::function<Tensor(const Tensor &)> &f,
                               const Tensor &x,
                               const GradCheckOptions &options) {
  Tensor var = x.Clone();
  return CheckGradients([&]() { return f(var); }, {var}, options);
}

}  // namespace ifasnet
