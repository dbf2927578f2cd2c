// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Layers composed from the differentiable primitives in ops.h.

#ifndef IFASNET_NN_H_
#define IFASNET_NN_H_

#include <string>

#include "ifasnet/params.h"
#include "ifasnet/tensor.h"

namespace ifasnet {

struct LinearWeights {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]
};

// Weight ~ U(-1/sqrt(in), 1/sqrt(in)), zero bias. Registered as
// "<prefix>.weight" and "<prefix>.bias".
LinearWeights RegisterLinear(ParamStore &store, const std::string &prefix,
                             int64_t in, int64_t out, Rng &rng);

// x: [..., in] -> [..., out].
Tensor ApplyLinear(const Tensor &x, const LinearWeights &w);

// Gate columns are ordered (input, forget, output, cell).
struct LstmWeights {
  Tensor w_ih;  // [in x 4H]
  Tensor w_hh;  // [H x 4H]
  Tensor bias;  // [4H]
  int64_t hidden() const { return w_hh.dim(0); }
};

struct BlstmWeights {
  LstmWeights forward;
  LstmWeights backward;
  int64_t output_dim() const { return 2 * forward.hidden(); }
};

// Orthogonal recurrent blocks, U(-1/sqrt(H), 1/sqrt(H)) input weights, zero
// biases. Registered as "<prefix>.{fwd|bwd}.{w_ih|w_hh|bias}".
BlstmWeights RegisterBlstm(ParamStore &store, const std::string &prefix,
                           int64_t in, int64_t hidden, Rng &rng);

// seq: [T x B x in] -> [T x B x H]; `reverse` runs from the last step.
Tensor RunLstm(const Tensor &seq, const LstmWeights &w, bool reverse);

// seq: [T x B x in] -> [T x B x 2H], forward states first.
Tensor RunBlstm(const Tensor &seq, const BlstmWeights &w);

}  // namespace ifasnet

#endif  // IFASNET_NN_H_
