// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Invariant checks shared by `ifasnet selfcheck` and the acceptance suite.

#ifndef IFASNET_CHECKS_H_
#define IFASNET_CHECKS_H_

#include <functional>
#include <string>
#include <vector>

#include "ifasnet/model.h"

namespace ifasnet {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct InvariantCheck {
  std::string name;
  // Returns pass/fail and fills `detail` with the measured figures.
  std::function<bool(std::string *detail)> run;
};

// Runs one check, timing it. An escaping exception counts as a failure.
CheckResult RunCheck(const InvariantCheck &check);

// Toggles of `preset` with every size shrunk so finite differences over all
// parameters stay cheap.
ModelConfig TinyConfig(const std::string &preset);

// Autodiff vs central differences (h = 1e-5, relative tolerance 1e-4) for
// every differentiable primitive over `seeds` random inputs.
bool CheckPrimitiveGradients(int seeds, std::string *detail);

struct LossPathGradients {
  int seeds = 0;
  // Seeds with a coordinate above 1e-4 under central differences at h = 1e-5.
  int strict_failures = 0;
  // Seeds still failing after five-point confirmation at h = 1e-3.
  int confirmed_failures = 0;
  int64_t coordinates = 0;
  int64_t confirmed_coordinates = 0;
  double max_strict_error = 0.0;
  double max_confirmed_error = 0.0;

  std::string Summary() const;
};
// Gradient check of the full training loss (PIT SNR plus auxiliary
// autoencoding) of one tiny-sized preset over all parameters, at random
// parameter points.
LossPathGradients MeasureLossPathGradients(const std::string &preset, int seeds);
// split -> overlap-add reconstruction below 1e-10 for random signals of
// 1k..80k samples at the default framing.
bool CheckFramingRoundTrip(int signals, std::string *detail);
// tNCC/fNCC bounds (silence included), fNCC reference Gram symmetry and unit
// diagonal, fNCC row-scale invariance, tNCC delay recovery for |d| <= W.
bool CheckNccProperties(std::string *detail);
// Direct-path peak lands on round(d / c * fs) over random geometries.
bool CheckRirDirectPath(int geometries, std::string *detail);

// The suite run by `ifasnet selfcheck`. Loss-path checks pass on the
// confirmed verdict.
std::vector<InvariantCheck> SelfCheckSuite();

}  // namespace ifasnet

#endif  // IFASNET_CHECKS_H_
