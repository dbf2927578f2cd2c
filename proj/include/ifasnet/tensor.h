// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef IFASNET_TENSOR_H_
#define IFASNET_TENSOR_H_

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ifasnet/error.h"

namespace ifasnet {

using Shape = std::vector<int64_t>;

int64_t NumElements(const Shape &shape);
std::string ShapeString(const Shape &shape);

struct TensorNode {
  Shape shape;
  std::vector<double> value;
  // Empty until the first gradient contribution lands.
  std::vector<double> grad;
  bool requires_grad = false;
  // False for tensors produced by a recorded op.
  bool is_leaf = true;
};

// Dense row-major tensor of doubles. Copies share storage; use Clone() for a
// deep copy. Gradients are populated by Tape::Backward for tensors that
// require them.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> values);

  static Tensor Zeros(const Shape &shape);
  static Tensor Ones(const Shape &shape);
  static Tensor Full(const Shape &shape, double value);
  static Tensor Scalar(double value);

  const Shape &shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int64_t dim(int axis) const;
  int64_t numel() const { return static_cast<int64_t>(node_->value.size()); }
  bool empty() const { return node_->value.empty(); }

  std::span<const double> data() const { return node_->value; }
  // Direct write access; only meaningful on leaves (parameters, inputs).
  std::span<double> mutable_data() { return node_->value; }
  const std::vector<double> &values() const { return node_->value; }
  double item() const;
  double at(std::initializer_list<int64_t> index) const;

  bool requires_grad() const { return node_->requires_grad; }
  Tensor &set_requires_grad(bool flag);
  bool is_leaf() const { return node_->is_leaf; }
  bool has_grad() const { return !node_->grad.empty(); }
  // Zero-filled view when no gradient has been accumulated yet.
  std::vector<double> grad() const;
  std::span<double> mutable_grad();
  void ZeroGrad();

  Tensor Clone() const;
  // Same values, no gradient history.
  Tensor Detach() const { return Clone(); }

  const std::shared_ptr<TensorNode> &node() const { return node_; }
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<TensorNode> node_;
};

// Ordered record of executed primitives. Ops record onto the calling thread's
// tape whenever an input requires a gradient.
class Tape {
 public:
  // Receives the output gradient; adds into the inputs' gradient buffers.
  using BackwardFn = std::function<void(std::span<const double> grad_out)>;

  void Record(std::string_view op, std::vector<std::shared_ptr<TensorNode>> inputs,
              std::shared_ptr<TensorNode> output, BackwardFn backward);

  // Populates gradients of every requires-grad leaf reachable from `loss`.
  // Leaf gradients accumulate across calls until ZeroGrad(); intermediate
  // gradients are recomputed on each call.
  void Backward(const Tensor &loss);

  void Reset();
  size_t size() const { return entries_.size(); }
  bool Contains(const TensorNode *node) const;

 private:
  struct Entry {
    std::string_view op;
    std::vector<std::shared_ptr<TensorNode>> inputs;
    std::shared_ptr<TensorNode> output;
    BackwardFn backward;
  };
  std::vector<Entry> entries_;
};

Tape &CurrentTape();

bool GradRecordingEnabled();

// Disables recording on this thread for the scope's lifetime.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope &) = delete;
  NoGradScope &operator=(const NoGradScope &) = delete;

 private:
  bool previous_;
};

// Gradient buffer of `node`, allocated and zero-filled on first use.
std::span<double> GradBuffer(TensorNode &node);

}  // namespace ifasnet

#endif  // IFASNET_TENSOR_H_
