// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ifasnet/beamformer.h"

#include <string>

#include "ifasnet/error.h"
#include "ifasnet/features.h"
#include "ifasnet/ops.h"

namespace ifasnet {

Tensor ExplicitFilterAndSum(const Tensor &ctx, const Tensor &filters,
                            int64_t ref_channel) {
  if (ctx.rank() != 3 || filters.rank() != 4 ||
      filters.dim(2) != ctx.dim(1) || filters.dim(3) > ctx.dim(2)) {
    throw ShapeError("filter_and_sum: context " + ShapeString(ctx.shape()) +
                     " incompatible with filters " +
                     ShapeString(filters.shape()));
  }
  const int64_t m = ctx.dim(0), channels = filters.dim(1);
  Tensor used = ctx;
  if (channels == 1 && m != 1) {
    if (ref_channel < 0 || ref_channel >= m) {
      throw ShapeError("filter_and_sum: reference channel out of range");
    }
    used = Slice(ctx, 0, ref_channel, 1);
  } else if (channels != m) {
    throw ShapeError("filter_and_sum: " + std::to_string(channels) +
                     " filters for " + std::to_string(m) + " channels");
  }
  const Tensor per_channel =
      CorrelateValid(Repeat(used, 0, filters.dim(0)), filters);
  return SumAxis(per_channel, 1);
}

Tensor ImplicitFilter(const Tensor &f_ref, const Tensor &filters,
                      int64_t context) {
  if (f_ref.rank() != 2) {
    throw ShapeError("implicit_filter: expected f [T x N], got " +
                     ShapeString(f_ref.shape()));
  }
  const int64_t t = f_ref.dim(0), n = f_ref.dim(1);
  if (filters.rank() == 3) {
    if (filters.dim(1) != t || filters.dim(2) != n) {
      throw ShapeError("implicit_filter: filters " +
                       ShapeString(filters.shape()) + " vs f " +
                       ShapeString(f_ref.shape()));
    }
    return Mul(f_ref, filters);
  }
  const int64_t p = 1 + 2 * context;
  if (filters.rank() != 4 || filters.dim(1) != t || filters.dim(2) != p ||
      filters.dim(3) != n) {
    throw ShapeError("implicit_filter: context filters " +
                     ShapeString(filters.shape()) + " vs f " +
                     ShapeString(f_ref.shape()) + " with C = " +
                     std::to_string(context));
  }
  const Tensor stacked = StackFeatureContext(f_ref, context);  // [T x P x N]
  return MeanAxis(Mul(stacked, filters), 2);
}

Tensor RenderLatent(const Tensor &z, const Tensor &decoder,
                    const FramingConfig &cfg, int64_t samples) {
  return RenderFrames(DecodeFrames(z, decoder), cfg, samples);
}

Tensor RenderFrames(const Tensor &frames, const FramingConfig &cfg,
                    int64_t samples) {
  if (frames.rank() < 2 || frames.dim(-1) != cfg.frame_len) {
    throw ShapeError("render: frames " + ShapeString(frames.shape()) +
                     " do not have length " + std::to_string(cfg.frame_len));
  }
  return OverlapAdd(frames, cfg.hop, samples);
}

}  // namespace ifasnet
