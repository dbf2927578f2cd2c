// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ifasnet/params.h"

#include <Eigen/Dense>

namespace ifasnet {

Tensor ParamStore::Add(const std::string &name, Tensor value) {
  if (index_.count(name)) throw ConfigError("duplicate parameter " + name);
  value.set_requires_grad(true);
  index_[name] = entries_.size();
  entries_.emplace_back(name, value);
  return value;
}

const Tensor &ParamStore::Get(const std::string &name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter " + name);
  return entries_[it->second].second;
}

bool ParamStore::Contains(const std::string &name) const {
  return index_.count(name) > 0;
}

std::vector<Tensor> ParamStore::Tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto &[name, t] : entries_) out.push_back(t);
  return out;
}

int64_t ParamStore::NumParameters() const {
  int64_t n = 0;
  for (const auto &[name, t] : entries_) n += t.numel();
  return n;
}

void ParamStore::ZeroGrad() {
  for (auto &[name, t] : entries_) t.ZeroGrad();
}

void ParamStore::LoadValues(
    const std::vector<std::pair<std::string, Tensor>> &other) {
  std::unordered_map<std::string, const Tensor *> by_name;
  for (const auto &[name, t] : other) by_name[name] = &t;
  for (auto &[name, t] : entries_) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("checkpoint lacks tensor " + name);
    if (it->second->shape() != t.shape()) {
      throw FormatError("checkpoint tensor " + name + " has shape " +
                        ShapeString(it->second->shape()) + ", model expects " +
                        ShapeString(t.shape()));
    }
    std::copy(it->second->values().begin(), it->second->values().end(),
              t.mutable_data().begin());
  }
}

Tensor UniformTensor(const Shape &shape, double bound, Rng &rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(NumElements(shape));
  for (double &x : v) x = dist(rng);
  return Tensor(shape, std::move(v));
}

Tensor NormalTensor(const Shape &shape, double stddev, Rng &rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(NumElements(shape));
  for (double &x : v) x = dist(rng);
  return Tensor(shape, std::move(v));
}

Tensor OrthogonalMatrix(int64_t n, Rng &rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::MatrixXd a(n, n);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j) a(i, j) = dist(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  // Sign fix so the draw is uniform over the orthogonal group.
  const Eigen::MatrixXd r = qr.matrixQR();
  for (int64_t j = 0; j < n; ++j) {
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  }
  std::vector<double> v(n * n);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j) v[i * n + j] = q(i, j);
  return Tensor({n, n}, std::move(v));
}

}  // namespace ifasnet
