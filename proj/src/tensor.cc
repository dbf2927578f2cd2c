// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ifasnet/tensor.h"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace ifasnet {

int64_t NumElements(const Shape &shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 0) throw ShapeError("negative dimension in " + ShapeString(shape));
    n *= d;
  }
  return n;
}

std::string ShapeString(const Shape &shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor() : node_(std::make_shared<TensorNode>()) {
  node_->shape = {0};
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : node_(std::make_shared<TensorNode>()) {
  if (NumElements(shape) != static_cast<int64_t>(values.size())) {
    throw ShapeError("tensor shape " + ShapeString(shape) + " holds " +
                     std::to_string(NumElements(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  node_->shape = std::move(shape);
  node_->value = std::move(values);
}

Tensor Tensor::Zeros(const Shape &shape) {
  return Tensor(shape, std::vector<double>(NumElements(shape), 0.0));
}

Tensor Tensor::Ones(const Shape &shape) { return Full(shape, 1.0); }

Tensor Tensor::Full(const Shape &shape, double value) {
  return Tensor(shape, std::vector<double>(NumElements(shape), value));
}

Tensor Tensor::Scalar(double value) { return Tensor({}, {value}); }

int64_t Tensor::dim(int axis) const {
  const int r = rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     ShapeString(shape()));
  }
  return node_->shape[axis];
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item() on tensor of shape " + ShapeString(shape()));
  }
  return node_->value[0];
}

double Tensor::at(std::initializer_list<int64_t> index) const {
  if (static_cast<int>(index.size()) != rank()) {
    throw ShapeError("index rank mismatch for " + ShapeString(shape()));
  }
  int64_t flat = 0;
  int axis = 0;
  for (int64_t i : index) {
    const int64_t d = node_->shape[axis++];
    if (i < 0 || i >= d) throw ShapeError("index out of range");
    flat = flat * d + i;
  }
  return node_->value[flat];
}

Tensor &Tensor::set_requires_grad(bool flag) {
  node_->requires_grad = flag;
  return *this;
}

std::vector<double> Tensor::grad() const {
  if (node_->grad.empty()) return std::vector<double>(node_->value.size(), 0.0);
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() { return GradBuffer(*node_); }

void Tensor::ZeroGrad() { node_->grad.clear(); }

Tensor Tensor::Clone() const { return Tensor(node_->shape, node_->value); }

std::span<double> GradBuffer(TensorNode &node) {
  if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
  return node.grad;
}

void Tape::Record(std::string_view op,
                  std::vector<std::shared_ptr<TensorNode>> inputs,
                  std::shared_ptr<TensorNode> output, BackwardFn backward) {
  output->requires_grad = true;
  output->is_leaf = false;
  entries_.push_back(
      {op, std::move(inputs), std::move(output), std::move(backward)});
}

bool Tape::Contains(const TensorNode *node) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [node](const Entry &e) { return e.output.get() == node; });
}

void Tape::Backward(const Tensor &loss) {
  if (loss.numel() != 1) {
    throw ShapeError("backward needs a scalar loss, got " +
                     ShapeString(loss.shape()));
  }
  TensorNode *root = loss.node().get();
  if (root->is_leaf) {
    if (!root->requires_grad) {
      throw Error("backward on a tensor that is not attached to any tape");
    }
    GradBuffer(*root)[0] += 1.0;
    return;
  }
  // Locate the producing entry; everything after it cannot contribute.
  size_t end = entries_.size();
  while (end > 0 && entries_[end - 1].output.get() != root) --end;
  if (end == 0) {
    throw Error("backward on a loss that was not produced on the active tape");
  }
  for (size_t i = 0; i < end; ++i) entries_[i].output->grad.clear();
  GradBuffer(*root)[0] = 1.0;
  for (size_t i = end; i-- > 0;) {
    Entry &e = entries_[i];
    if (e.output->grad.empty()) continue;
    e.backward(e.output->grad);
  }
}

void Tape::Reset() { entries_.clear(); }

namespace {
thread_local Tape tls_tape;
thread_local bool tls_recording = true;
}  // namespace

Tape &CurrentTape() { return tls_tape; }

bool GradRecordingEnabled() { return tls_recording; }

NoGradScope::NoGradScope() : previous_(tls_recording) { tls_recording = false; }

NoGradScope::~NoGradScope() { tls_recording = previous_; }

}  // namespace ifasnet
