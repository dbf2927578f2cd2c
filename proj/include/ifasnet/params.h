// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef IFASNET_PARAMS_H_
#define IFASNET_PARAMS_H_

#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ifasnet/tensor.h"

namespace ifasnet {

// Named learnable tensors in registration order.
class ParamStore {
 public:
  // Registers `value` as a gradient-tracking leaf; names must be unique.
  Tensor Add(const std::string &name, Tensor value);
  const Tensor &Get(const std::string &name) const;
  bool Contains(const std::string &name) const;

  const std::vector<std::pair<std::string, Tensor>> &entries() const {
    return entries_;
  }
  std::vector<Tensor> Tensors() const;
  int64_t NumParameters() const;
  void ZeroGrad();

  // Copies values from `other` (matching names and shapes required).
  void LoadValues(const std::vector<std::pair<std::string, Tensor>> &other);

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::unordered_map<std::string, size_t> index_;
};

using Rng = std::mt19937_64;

Tensor UniformTensor(const Shape &shape, double bound, Rng &rng);
Tensor NormalTensor(const Shape &shape, double stddev, Rng &rng);
// Square orthogonal matrix from the QR factorization of a Gaussian draw.
Tensor OrthogonalMatrix(int64_t n, Rng &rng);

}  // namespace ifasnet

#endif  // IFASNET_PARAMS_H_
