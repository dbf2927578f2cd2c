// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Applying estimated filters: waveform-domain filter-and-sum over context
// frames, or latent-space masking pooled over a frame context.

#ifndef IFASNET_BEAMFORMER_H_
#define IFASNET_BEAMFORMER_H_

#include "ifasnet/framing.h"
#include "ifasnet/tensor.h"

namespace ifasnet {

// ctx: [M x T x (L + 2W)], filters: [S x M' x T x (1 + 2W)] -> [S x T x L].
// Each filter is slid along its channel's context frame (correlation, no
// flip) and the channel outputs are summed. With M' = 1 only the
// `ref_channel` context is used; otherwise M' must equal M.
Tensor ExplicitFilterAndSum(const Tensor &ctx, const Tensor &filters,
                            int64_t ref_channel = 0);

// f_ref: [T x N]. Without context, filters: [S x T x N] and
// z = f_ref * filters. With context C, filters: [S x T x (1 + 2C) x N] where
// row j of frame t weights f_ref[t - C + j] (zero outside the signal), and
// z[t] = sum_j f_ref[t - C + j] * filters[t, j] / (1 + 2C).
Tensor ImplicitFilter(const Tensor &f_ref, const Tensor &filters,
                      int64_t context);

// Implicit path: latent z [S x T x N] decoded with U [N x L] and overlap-added.
Tensor RenderLatent(const Tensor &z, const Tensor &decoder,
                    const FramingConfig &cfg, int64_t samples);

// Explicit path: frames [S x T x L] overlap-added to [S x samples].
Tensor RenderFrames(const Tensor &frames, const FramingConfig &cfg,
                    int64_t samples);

}  // namespace ifasnet

#endif  // IFASNET_BEAMFORMER_H_
