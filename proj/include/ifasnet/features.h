// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Channel-wise encoders/decoder, cross-channel NCC features and the context
// encoder/decoder used by context-aware filtering.

#ifndef IFASNET_FEATURES_H_
#define IFASNET_FEATURES_H_

#include <string>

#include "ifasnet/framing.h"
#include "ifasnet/nn.h"
#include "ifasnet/params.h"
#include "ifasnet/tensor.h"

namespace ifasnet {

// Floor applied to every norm (or norm product) used as a cosine denominator.
inline constexpr double kNormFloor = 1e-8;

// s = context_frames x context_encoder, per frame, no bias.
// ctx: [M x T x (L + 2W)], weight: [(L + 2W) x N] -> [M x T x N].
Tensor EncodeContextFrames(const ContextFrameSet &ctx, const Tensor &weight);

// f = center_frames x center_encoder. frames: [M x T x L], weight: [L x N].
Tensor EncodeCenterFrames(const FrameSet &frames, const Tensor &weight);

// Latent frames back to waveform frames: z [..., N] x U [N x L] -> [..., L].
Tensor DecodeFrames(const Tensor &latent, const Tensor &decoder);

enum class NccKind { kTime, kFeature };

struct NccFeature {
  NccKind kind = NccKind::kTime;
  Tensor values;  // [M x T x D]
};

// Sample-level NCC between the reference center frame and every length-L
// window of each channel's context frame:
//   q[i, t, j] = <y_ref[t], ctx[i, t, j : j + L]> /
//                max(|y_ref[t]| |ctx[i, t, j : j + L]|, kNormFloor)
// for j = 0 .. 2W. reference_frames: [T x L]; D = 1 + 2W.
NccFeature Tncc(const Tensor &reference_frames, const ContextFrameSet &ctx);

// Feature-level NCC. context_features: [M x T x P x N] with P = 1 + 2C from
// StackFeatureContext. Each of the P rows is scaled to unit length, then
// q[i, t] = Fbar[ref, t] Fbar[i, t]^T (P x P) flattened row-major, reference
// context index major. D = P^2.
NccFeature Fncc(const Tensor &context_features, int64_t ref_channel = 0);

// Floating-point multiplications needed for one frame of the feature:
// tNCC L(1+2W)M, fNCC N(1+2C)^2 M.
int64_t CountNccMultiplies(NccKind kind, int64_t frame_len,
                           int64_t sample_context, int64_t feature_context,
                           int64_t feature_dim, int64_t channels);

enum class ContextCodecKind { kRnn, kMlp };

struct ContextCodecParams {
  ContextCodecKind kind = ContextCodecKind::kRnn;
  // kRnn
  BlstmWeights enc_rnn1, enc_rnn2, dec_rnn1, dec_rnn2;
  LinearWeights enc_proj, dec_head;
  // kMlp
  LinearWeights enc_mlp1, enc_mlp2, dec_mlp1, dec_mlp2;
};

// Registers "ctxcodec.enc.*" and "ctxcodec.dec.*". `rows` is 1 + 2C.
ContextCodecParams RegisterContextCodec(ParamStore &store, ContextCodecKind kind,
                                        int64_t feature_dim, int64_t hidden,
                                        int64_t rows, Rng &rng);

// Squeezes each context stack [..., P x N] into one vector [..., N]:
// recurrent pass over the P rows, mean-pool over rows, linear projection.
Tensor ContextEncode(const Tensor &context_features,
                     const ContextCodecParams &params);

// Filters for every context position. reference_context: [..., P x N],
// separator output g: [..., N] -> [..., P x N]. g is appended to each row
// before the recurrent pass; a linear head maps each position to N.
Tensor ContextDecode(const Tensor &reference_context, const Tensor &g,
                     const ContextCodecParams &params);

}  // namespace ifasnet

#endif  // IFASNET_FEATURES_H_
