// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ifasnet/features.h"

#include "ifasnet/ops.h"

namespace ifasnet {

namespace {

void ExpectInnerDim(const Tensor &x, const Tensor &weight, const char *op) {
  if (weight.rank() != 2 || x.rank() < 1 || x.shape().back() != weight.dim(0)) {
    throw ShapeError(std::string(op) + ": input " + ShapeString(x.shape()) +
                     " does not match weight " + ShapeString(weight.shape()));
  }
}

// [..., P x D] -> ([P x B x D], leading dims)
std::pair<Tensor, Shape> ToSequence(const Tensor &x) {
  const int r = x.rank();
  Shape lead(x.shape().begin(), x.shape().end() - 2);
  const int64_t p = x.dim(r - 2), d = x.dim(r - 1);
  Tensor flat = Reshape(x, {-1, p, d});
  return {Permute(flat, {1, 0, 2}), lead};
}

}  // namespace

Tensor EncodeContextFrames(const ContextFrameSet &ctx, const Tensor &weight) {
  ExpectInnerDim(ctx.frames, weight, "encode_context_frames");
  return MatMul(ctx.frames, weight);
}

Tensor EncodeCenterFrames(const FrameSet &frames, const Tensor &weight) {
  ExpectInnerDim(frames.frames, weight, "encode_center_frames");
  return MatMul(frames.frames, weight);
}

Tensor DecodeFrames(const Tensor &latent, const Tensor &decoder) {
  ExpectInnerDim(latent, decoder, "decode_frames");
  return MatMul(latent, decoder);
}

NccFeature Tncc(const Tensor &reference_frames, const ContextFrameSet &ctx) {
  const Tensor &c = ctx.frames;
  if (c.rank() != 3 || reference_frames.rank() != 2 ||
      reference_frames.dim(0) != c.dim(1) ||
      reference_frames.dim(1) > c.dim(2)) {
    throw ShapeError("tncc: reference " + ShapeString(reference_frames.shape()) +
                     " incompatible with context frames " +
                     ShapeString(c.shape()));
  }
  const int64_t m = c.dim(0), t = c.dim(1), l = reference_frames.dim(1);
  const Tensor ref = Repeat(reference_frames, 0, m);  // [M x T x L]
  const Tensor numerator = CorrelateValid(c, ref);
  const Tensor window_norm =
      Sqrt(CorrelateValid(Square(c), Tensor::Ones({m, t, l})));
  const Tensor ref_norm = Reshape(L2NormAxis(reference_frames, 1), {1, t, 1});
  const Tensor denom = ClampMin(Mul(window_norm, ref_norm), kNormFloor);
  return {NccKind::kTime, Div(numerator, denom)};
}

NccFeature Fncc(const Tensor &context_features, int64_t ref_channel) {
  const Tensor &f = context_features;
  if (f.rank() != 4) {
    throw ShapeError("fncc: expected [M x T x P x N], got " +
                     ShapeString(f.shape()));
  }
  const int64_t m = f.dim(0), t = f.dim(1), p = f.dim(2), n = f.dim(3);
  if (ref_channel < 0 || ref_channel >= m) {
    throw ShapeError("fncc: reference channel out of range");
  }
  const Tensor norms = Reshape(L2NormAxis(f, 3), {m, t, p, 1});
  const Tensor unit = Div(f, ClampMin(norms, kNormFloor));
  const Tensor ref = Repeat(Select(unit, 0, ref_channel), 0, m);
  const Tensor gram =
      BatchMatMulNT(Reshape(ref, {m * t, p, n}), Reshape(unit, {m * t, p, n}));
  return {NccKind::kFeature, Reshape(gram, {m, t, p * p})};
}

int64_t CountNccMultiplies(NccKind kind, int64_t frame_len,
                           int64_t sample_context, int64_t feature_context,
                           int64_t feature_dim, int64_t channels) {
  if (kind == NccKind::kTime) {
    return frame_len * (1 + 2 * sample_context) * channels;
  }
  const int64_t p = 1 + 2 * feature_context;
  return feature_dim * p * p * channels;
}

ContextCodecParams RegisterContextCodec(ParamStore &store, ContextCodecKind kind,
                                        int64_t feature_dim, int64_t hidden,
                                        int64_t rows, Rng &rng) {
  ContextCodecParams p;
  p.kind = kind;
  const int64_t n = feature_dim;
  if (kind == ContextCodecKind::kRnn) {
    p.enc_rnn1 = RegisterBlstm(store, "ctxcodec.enc.rnn1", n, hidden, rng);
    p.enc_rnn2 = RegisterBlstm(store, "ctxcodec.enc.rnn2", 2 * hidden, hidden, rng);
    p.enc_proj = RegisterLinear(store, "ctxcodec.enc.proj", 2 * hidden, n, rng);
    p.dec_rnn1 = RegisterBlstm(store, "ctxcodec.dec.rnn1", 2 * n, hidden, rng);
    p.dec_rnn2 = RegisterBlstm(store, "ctxcodec.dec.rnn2", 2 * hidden, hidden, rng);
    p.dec_head = RegisterLinear(store, "ctxcodec.dec.head", 2 * hidden, n, rng);
  } else {
    p.enc_mlp1 = RegisterLinear(store, "ctxcodec.enc.mlp1", rows * n, hidden, rng);
    p.enc_mlp2 = RegisterLinear(store, "ctxcodec.enc.mlp2", hidden, n, rng);
    p.dec_mlp1 = RegisterLinear(store, "ctxcodec.dec.mlp1", 2 * n, hidden, rng);
    p.dec_mlp2 = RegisterLinear(store, "ctxcodec.dec.mlp2", hidden, n, rng);
  }
  return p;
}

Tensor ContextEncode(const Tensor &context_features,
                     const ContextCodecParams &params) {
  if (context_features.rank() < 2) {
    throw ShapeError("context_encode: expected [..., P x N]");
  }
  const int r = context_features.rank();
  const int64_t p = context_features.dim(r - 2), n = context_features.dim(r - 1);
  Shape out_shape(context_features.shape().begin(),
                  context_features.shape().end() - 2);
  out_shape.push_back(n);
  if (params.kind == ContextCodecKind::kMlp) {
    Tensor flat = Reshape(context_features, {-1, p * n});
    Tensor h = Tanh(ApplyLinear(flat, params.enc_mlp1));
    return Reshape(ApplyLinear(h, params.enc_mlp2), out_shape);
  }
  auto [seq, lead] = ToSequence(context_features);
  Tensor h = RunBlstm(RunBlstm(seq, params.enc_rnn1), params.enc_rnn2);
  Tensor pooled = MeanAxis(h, 0);  // [B x 2H]
  return Reshape(ApplyLinear(pooled, params.enc_proj), out_shape);
}

Tensor ContextDecode(const Tensor &reference_context, const Tensor &g,
                     const ContextCodecParams &params) {
  const int r = reference_context.rank();
  if (r < 2 || g.rank() != r - 1) {
    throw ShapeError("context_decode: context " +
                     ShapeString(reference_context.shape()) + " vs g " +
                     ShapeString(g.shape()));
  }
  const int64_t p = reference_context.dim(r - 2), n = reference_context.dim(r - 1);
  for (int i = 0; i < r - 2; ++i) {
    if (g.dim(i) != reference_context.dim(i)) {
      throw ShapeError("context_decode: leading dimensions differ");
    }
  }
  if (g.dim(-1) != n) {
    throw ShapeError("context_decode: g has " + std::to_string(g.dim(-1)) +
                     " features, context rows have " + std::to_string(n));
  }
  const Tensor rows = Concat({reference_context, Repeat(g, r - 2, p)}, r - 1);
  if (params.kind == ContextCodecKind::kMlp) {
    Tensor h = Tanh(ApplyLinear(rows, params.dec_mlp1));
    return ApplyLinear(h, params.dec_mlp2);
  }
  auto [seq, lead] = ToSequence(rows);
  Tensor h = RunBlstm(RunBlstm(seq, params.dec_rnn1), params.dec_rnn2);
  Tensor filters = Permute(ApplyLinear(h, params.dec_head), {1, 0, 2});
  Shape out_shape = lead;
  out_shape.push_back(p);
  out_shape.push_back(n);
  return Reshape(filters, out_shape);
}

}  // namespace ifasnet
