// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Filter estimation backbone: dual-path recurrent blocks over 50%-overlapped
// chunks, with a transform-average-concatenate (TAC) layer after each block
// for cross-channel fusion.

#ifndef IFASNET_SEPARATOR_H_
#define IFASNET_SEPARATOR_H_

#include <vector>

#include "ifasnet/nn.h"
#include "ifasnet/params.h"
#include "ifasnet/tensor.h"

namespace ifasnet {

struct SeparatorConfig {
  int64_t n_sources = 2;
  int64_t n_blocks = 2;
  int64_t hidden = 64;      // per-direction LSTM width
  int64_t chunk_len = 24;   // frames; chunks hop by chunk_len / 2
  int64_t feature_dim = 64; // width of the residual stream
  int64_t input_dim = 0;    // channel feature + cross-channel feature
  int64_t filter_dim = 0;   // 1 + 2W (explicit) or N (implicit)
  bool miso = false;

  // Throws ConfigError on non-positive sizes or chunk_len < 2.
  void Validate() const;
};

struct TacWeights {
  LinearWeights transform;  // F -> 3F
  LinearWeights average;    // 3F -> 3F
  LinearWeights concat;     // 6F -> F
};

struct DprnnBlockWeights {
  BlstmWeights intra_rnn;
  LinearWeights intra_proj;
  BlstmWeights inter_rnn;
  LinearWeights inter_proj;
  TacWeights tac;
};

struct SeparatorParams {
  LinearWeights input;
  std::vector<DprnnBlockWeights> blocks;
  std::vector<LinearWeights> heads;  // one per source
};

// Names: "sep.input.*", "sep.block{k}.{intra|inter|tac}.*", "sep.head{s}.*".
SeparatorParams RegisterSeparator(ParamStore &store, const SeparatorConfig &cfg,
                                  Rng &rng);

// Number of chunks for T frames: ceil(T / hop), at least 1.
int64_t NumChunks(int64_t frames, int64_t chunk_len);

// seq: [M x T x D] -> [M x S x chunk_len x D]; chunk s starts at frame
// s * chunk_len / 2, zero past the end.
Tensor SegmentChunks(const Tensor &seq, int64_t chunk_len);

// Inverse of SegmentChunks: overlapping chunk frames are averaged.
// chunks: [M x S x K x D] -> [M x frames x D].
Tensor MergeChunks(const Tensor &chunks, int64_t frames);

// x: [M x ... x F]. Per-channel tanh transform, channel mean, tanh on the
// mean, concatenation with each channel's transform, tanh projection back to
// F, plus the input.
Tensor TacLayer(const Tensor &x, const TacWeights &w);

// x: [M x S x K x F] -> same shape.
Tensor DprnnBlock(const Tensor &x, const DprnnBlockWeights &w);

// features: [M x T x input_dim] -> [n_sources x M' x T x filter_dim] with
// M' = 1 (reading ref_channel's state) when cfg.miso, else M.
Tensor Separate(const Tensor &features, const SeparatorConfig &cfg,
                const SeparatorParams &params, int64_t ref_channel = 0);

}  // namespace ifasnet

#endif  // IFASNET_SEPARATOR_H_
