// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ifasnet/separator.h"

#include <string>

#include "ifasnet/error.h"
#include "ifasnet/ops.h"

namespace ifasnet {

void SeparatorConfig::Validate() const {
  if (n_sources < 1 || n_blocks < 0 || hidden < 1 || feature_dim < 1 ||
      input_dim < 1 || filter_dim < 1) {
    throw ConfigError("separator sizes must be positive");
  }
  if (chunk_len < 2) throw ConfigError("chunk_len must be at least 2");
}

SeparatorParams RegisterSeparator(ParamStore &store, const SeparatorConfig &cfg,
                                  Rng &rng) {
  cfg.Validate();
  const int64_t f = cfg.feature_dim, h = cfg.hidden;
  SeparatorParams p;
  p.input = RegisterLinear(store, "sep.input", cfg.input_dim, f, rng);
  for (int64_t k = 0; k < cfg.n_blocks; ++k) {
    const std::string b = "sep.block" + std::to_string(k);
    DprnnBlockWeights w;
    w.intra_rnn = RegisterBlstm(store, b + ".intra.rnn", f, h, rng);
    w.intra_proj = RegisterLinear(store, b + ".intra.proj", 2 * h, f, rng);
    w.inter_rnn = RegisterBlstm(store, b + ".inter.rnn", f, h, rng);
    w.inter_proj = RegisterLinear(store, b + ".inter.proj", 2 * h, f, rng);
    w.tac.transform = RegisterLinear(store, b + ".tac.transform", f, 3 * f, rng);
    w.tac.average = RegisterLinear(store, b + ".tac.average", 3 * f, 3 * f, rng);
    w.tac.concat = RegisterLinear(store, b + ".tac.concat", 6 * f, f, rng);
    p.blocks.push_back(std::move(w));
  }
  for (int64_t s = 0; s < cfg.n_sources; ++s) {
    p.heads.push_back(RegisterLinear(store, "sep.head" + std::to_string(s), f,
                                     cfg.filter_dim, rng));
  }
  return p;
}

int64_t NumChunks(int64_t frames, int64_t chunk_len) {
  const int64_t hop = chunk_len / 2;
  return std::max<int64_t>(1, (frames + hop - 1) / hop);
}

Tensor SegmentChunks(const Tensor &seq, int64_t chunk_len) {
  if (chunk_len < 2) throw ConfigError("chunk_len must be at least 2");
  if (seq.rank() != 3 || seq.dim(1) < 1) {
    throw ShapeError("segment_chunks: expected [M x T x D] with T >= 1, got " +
                     ShapeString(seq.shape()));
  }
  const int64_t s = NumChunks(seq.dim(1), chunk_len);
  // [M x D x T] -> [M x D x S x K] -> [M x S x K x D]
  Tensor chunks =
      ExtractFrames(Permute(seq, {0, 2, 1}), chunk_len, chunk_len / 2, 0, s);
  return Permute(chunks, {0, 2, 3, 1});
}

Tensor MergeChunks(const Tensor &chunks, int64_t frames) {
  if (chunks.rank() != 4 || frames < 1) {
    throw ShapeError("merge_chunks: expected [M x S x K x D], got " +
                     ShapeString(chunks.shape()));
  }
  const int64_t k = chunks.dim(2), hop = k / 2, s = chunks.dim(1);
  if ((s - 1) * hop + k < frames) {
    throw ShapeError("merge_chunks: chunks cover fewer than " +
                     std::to_string(frames) + " frames");
  }
  Tensor summed = OverlapAddSum(Permute(chunks, {0, 3, 1, 2}), hop);
  summed = Slice(summed, 2, 0, frames);  // [M x D x T]
  std::vector<double> inv(frames, 0.0);
  for (int64_t c = 0; c < s; ++c) {
    for (int64_t j = 0; j < k; ++j) {
      const int64_t t = c * hop + j;
      if (t < frames) inv[t] += 1.0;
    }
  }
  for (double &v : inv) v = 1.0 / v;
  return Permute(Mul(summed, Tensor({frames}, std::move(inv))), {0, 2, 1});
}

Tensor TacLayer(const Tensor &x, const TacWeights &w) {
  if (x.rank() < 2) throw ShapeError("tac: expected [M x ... x F]");
  const int64_t m = x.dim(0);
  const Tensor h = Tanh(ApplyLinear(x, w.transform));
  const Tensor avg = Tanh(ApplyLinear(MeanAxis(h, 0), w.average));
  const Tensor cat = Concat({h, Repeat(avg, 0, m)}, h.rank() - 1);
  return Add(x, Tanh(ApplyLinear(cat, w.concat)));
}

namespace {

// Runs a BLSTM along axis `seq_axis` of x [M x S x K x F] and adds the
// projected states back onto x.
Tensor RecurrentPass(const Tensor &x, const BlstmWeights &rnn,
                     const LinearWeights &proj, bool along_chunk) {
  const int64_t m = x.dim(0), s = x.dim(1), k = x.dim(2), f = x.dim(3);
  Tensor seq;
  if (along_chunk) {
    // [K x (M S) x F]
    seq = Permute(Reshape(x, {m * s, k, f}), {1, 0, 2});
  } else {
    // [S x (M K) x F]
    seq = Reshape(Permute(x, {1, 0, 2, 3}), {s, m * k, f});
  }
  Tensor out = ApplyLinear(RunBlstm(seq, rnn), proj);
  if (along_chunk) {
    out = Reshape(Permute(out, {1, 0, 2}), {m, s, k, f});
  } else {
    out = Permute(Reshape(out, {s, m, k, f}), {1, 0, 2, 3});
  }
  return Add(x, out);
}

}  // namespace

Tensor DprnnBlock(const Tensor &x, const DprnnBlockWeights &w) {
  if (x.rank() != 4) {
    throw ShapeError("dprnn_block: expected [M x S x K x F], got " +
                     ShapeString(x.shape()));
  }
  Tensor y = RecurrentPass(x, w.intra_rnn, w.intra_proj, true);
  y = RecurrentPass(y, w.inter_rnn, w.inter_proj, false);
  return TacLayer(y, w.tac);
}

Tensor Separate(const Tensor &features, const SeparatorConfig &cfg,
                const SeparatorParams &params, int64_t ref_channel) {
  if (features.rank() != 3 || features.dim(2) != cfg.input_dim) {
    throw ShapeError("separate: expected [M x T x " +
                     std::to_string(cfg.input_dim) + "], got " +
                     ShapeString(features.shape()));
  }
  if (static_cast<int64_t>(params.blocks.size()) != cfg.n_blocks ||
      static_cast<int64_t>(params.heads.size()) != cfg.n_sources) {
    throw ConfigError("separate: parameters do not match the configuration");
  }
  const int64_t m = features.dim(0), t = features.dim(1);
  if (ref_channel < 0 || ref_channel >= m) {
    throw ShapeError("separate: reference channel " +
                     std::to_string(ref_channel) + " out of range for " +
                     std::to_string(m) + " channels");
  }
  Tensor x = SegmentChunks(ApplyLinear(features, params.input), cfg.chunk_len);
  for (const DprnnBlockWeights &block : params.blocks) x = DprnnBlock(x, block);
  Tensor y = MergeChunks(x, t);  // [M x T x F]
  if (cfg.miso) y = Slice(y, 0, ref_channel, 1);
  std::vector<Tensor> outs;
  outs.reserve(params.heads.size());
  for (const LinearWeights &head : params.heads) {
    outs.push_back(ApplyLinear(y, head));
  }
  return Stack(outs, 0);
}

}  // namespace ifasnet
