// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ifasnet/nn.h"

#include <cmath>
#include <vector>

#include "ifasnet/ops.h"

namespace ifasnet {

LinearWeights RegisterLinear(ParamStore &store, const std::string &prefix,
                             int64_t in, int64_t out, Rng &rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  LinearWeights w;
  w.weight = store.Add(prefix + ".weight", UniformTensor({in, out}, bound, rng));
  w.bias = store.Add(prefix + ".bias", Tensor::Zeros({out}));
  return w;
}

Tensor ApplyLinear(const Tensor &x, const LinearWeights &w) {
  return Add(MatMul(x, w.weight), w.bias);
}

namespace {

LstmWeights RegisterLstm(ParamStore &store, const std::string &prefix,
                         int64_t in, int64_t hidden, Rng &rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  LstmWeights w;
  w.w_ih = store.Add(prefix + ".w_ih",
                     UniformTensor({in, 4 * hidden}, bound, rng));
  // One orthogonal H x H block per gate.
  std::vector<double> hh(hidden * 4 * hidden);
  for (int gate = 0; gate < 4; ++gate) {
    Tensor q = OrthogonalMatrix(hidden, rng);
    for (int64_t i = 0; i < hidden; ++i)
      for (int64_t j = 0; j < hidden; ++j)
        hh[i * 4 * hidden + gate * hidden + j] = q.values()[i * hidden + j];
  }
  w.w_hh = store.Add(prefix + ".w_hh", Tensor({hidden, 4 * hidden}, hh));
  w.bias = store.Add(prefix + ".bias", Tensor::Zeros({4 * hidden}));
  return w;
}

}  // namespace

BlstmWeights RegisterBlstm(ParamStore &store, const std::string &prefix,
                           int64_t in, int64_t hidden, Rng &rng) {
  BlstmWeights w;
  w.forward = RegisterLstm(store, prefix + ".fwd", in, hidden, rng);
  w.backward = RegisterLstm(store, prefix + ".bwd", in, hidden, rng);
  return w;
}

Tensor RunLstm(const Tensor &seq, const LstmWeights &w, bool reverse) {
  if (seq.rank() != 3) {
    throw ShapeError("lstm: expected [T x B x in], got " +
                     ShapeString(seq.shape()));
  }
  const int64_t steps = seq.dim(0), batch = seq.dim(1);
  const int64_t h = w.hidden();
  // Input projections for all steps at once: [T x B x 4H].
  const Tensor projected = Add(MatMul(seq, w.w_ih), w.bias);
  std::vector<Tensor> outputs(steps);
  Tensor hidden, cell;
  for (int64_t k = 0; k < steps; ++k) {
    const int64_t t = reverse ? steps - 1 - k : k;
    Tensor gates = Select(projected, 0, t);
    if (k > 0) gates = Add(gates, MatMul(hidden, w.w_hh));
    const Tensor ifo = Sigmoid(Slice(gates, 1, 0, 3 * h));
    const Tensor candidate = Tanh(Slice(gates, 1, 3 * h, h));
    const Tensor in_gate = Slice(ifo, 1, 0, h);
    const Tensor out_gate = Slice(ifo, 1, 2 * h, h);
    if (k == 0) {
      cell = Mul(in_gate, candidate);
    } else {
      const Tensor forget = Slice(ifo, 1, h, h);
      cell = Add(Mul(forget, cell), Mul(in_gate, candidate));
    }
    hidden = Mul(out_gate, Tanh(cell));
    outputs[t] = hidden;
  }
  if (steps == 0) return Tensor::Zeros({0, batch, h});
  return Stack(outputs, 0);
}

Tensor RunBlstm(const Tensor &seq, const BlstmWeights &w) {
  return Concat({RunLstm(seq, w.forward, false), RunLstm(seq, w.backward, true)},
                2);
}

}  // namespace ifasnet
