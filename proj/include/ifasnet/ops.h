// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Differentiable primitives. Every op validates shapes (ShapeError), rejects
// non-finite results (NumericError naming the op) and records itself on the
// current thread's tape when any input requires a gradient.

#ifndef IFASNET_OPS_H_
#define IFASNET_OPS_H_

#include <vector>

#include "ifasnet/tensor.h"

namespace ifasnet {

// Elementwise binary ops with NumPy-style broadcasting.
Tensor Add(const Tensor &a, const Tensor &b);
Tensor Sub(const Tensor &a, const Tensor &b);
Tensor Mul(const Tensor &a, const Tensor &b);
Tensor Div(const Tensor &a, const Tensor &b);

Tensor Scale(const Tensor &x, double factor);
Tensor AddScalar(const Tensor &x, double offset);

Tensor Tanh(const Tensor &x);
Tensor Sigmoid(const Tensor &x);
Tensor Square(const Tensor &x);
Tensor Sqrt(const Tensor &x);
Tensor Log(const Tensor &x);
// max(x, floor); gradient passes only where x > floor.
Tensor ClampMin(const Tensor &x, double floor);

// a: [..., K], b: [K x N] -> [..., N].
Tensor MatMul(const Tensor &a, const Tensor &b);
// a: [B x P x K], b: [B x Q x K] -> [B x P x Q] (a times b transposed).
Tensor BatchMatMulNT(const Tensor &a, const Tensor &b);

// Row-wise valid correlation: out[..., j] = sum_k x[..., j + k] * kernel[..., k].
// x: [..., Lx], kernel: [..., K] with identical leading dims;
// output: [..., Lx - K + 1].
Tensor CorrelateValid(const Tensor &x, const Tensor &kernel);

// Sum of every element; scalar output.
Tensor Sum(const Tensor &x);
// Reductions drop `axis`. Results do not depend on the order of the elements
// along `axis`, so permuting that axis leaves them bit-identical.
Tensor SumAxis(const Tensor &x, int axis);
Tensor MeanAxis(const Tensor &x, int axis);
// Euclidean norm along `axis`. Gradient at an all-zero slice is 0.
Tensor L2NormAxis(const Tensor &x, int axis);

Tensor Reshape(const Tensor &x, const Shape &shape);
Tensor Permute(const Tensor &x, const std::vector<int> &perm);
Tensor Slice(const Tensor &x, int axis, int64_t start, int64_t length);
// Slice of width one with the axis removed.
Tensor Select(const Tensor &x, int axis, int64_t index);
Tensor Concat(const std::vector<Tensor> &parts, int axis);
// Joins equally shaped tensors along a new axis.
Tensor Stack(const std::vector<Tensor> &parts, int axis);
// Zero padding along one axis.
Tensor Pad(const Tensor &x, int axis, int64_t front, int64_t back);
// Inserts a new axis of size `count` by repetition.
Tensor Repeat(const Tensor &x, int axis, int64_t count);

// frames: [..., T x L] -> [..., (T - 1) * hop + L], summing overlapping frames.
Tensor OverlapAddSum(const Tensor &frames, int64_t hop);
// x: [..., S] -> [..., count x frame_len]; frame i starts at offset + i * hop,
// zero outside [0, S).
Tensor ExtractFrames(const Tensor &x, int64_t frame_len, int64_t hop,
                     int64_t offset, int64_t count);

namespace testing {
// Corrupts the tanh backward pass; used to prove the gradient checks bite.
void SetGradientFault(bool enabled);
}  // namespace testing

}  // namespace ifasnet

#endif  // IFASNET_OPS_H_
