// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ifasnet/framing.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ifasnet/ops.h"

namespace ifasnet {

void FramingConfig::Validate() const {
  if (frame_len <= 0 || hop <= 0 || sample_context <= 0) {
    throw ConfigError("frame length, hop and sample context must be positive");
  }
  if (hop > frame_len) throw ConfigError("hop exceeds frame length");
  if (feature_context < 0) throw ConfigError("feature context must be >= 0");
  if (sample_context % hop != 0 || feature_context != sample_context / hop) {
    throw ConfigError("feature context must equal sample_context / hop (" +
                      std::to_string(sample_context) + " / " +
                      std::to_string(hop) + ")");
  }
}

int64_t NumFrames(int64_t samples, int64_t hop) {
  return (samples + hop - 1) / hop;
}

std::pair<FrameSet, ContextFrameSet> SplitFrames(const Tensor &signal,
                                                 const FramingConfig &cfg) {
  if (cfg.hop > cfg.frame_len) throw ConfigError("hop exceeds frame length");
  if (cfg.hop <= 0 || cfg.frame_len <= 0 || cfg.sample_context < 0) {
    throw ConfigError("invalid framing sizes");
  }
  if (signal.rank() != 2 || signal.dim(0) < 1) {
    throw ShapeError("split_frames: expected [M x samples], got " +
                     ShapeString(signal.shape()));
  }
  const int64_t samples = signal.dim(1);
  if (samples == 0) throw ShapeError("split_frames: empty signal");
  for (double v : signal.values()) {
    if (!std::isfinite(v)) throw NumericError("split_frames: non-finite input");
  }
  const int64_t l = cfg.frame_len, hop = cfg.hop, w = cfg.sample_context;
  const int64_t t = NumFrames(samples, hop);
  const int64_t lc = l + 2 * w;
  FrameSet fs;
  fs.frames = ExtractFrames(signal, l, hop, 0, t);
  fs.original_len = samples;
  fs.pad_front = 0;
  fs.pad_back = (t - 1) * hop + l - samples;
  ContextFrameSet cs;
  cs.frames = ExtractFrames(signal, lc, hop, -w, t);
  return {std::move(fs), std::move(cs)};
}

std::vector<double> SynthesisWindowValues(int64_t frame_len,
                                          SynthesisWindow window) {
  std::vector<double> w(frame_len, 1.0);
  if (window == SynthesisWindow::kHann) {
    for (int64_t n = 0; n < frame_len; ++n) {
      const double s = std::sin(std::numbers::pi * (n + 0.5) / frame_len);
      w[n] = s * s;
    }
  }
  return w;
}

Tensor OverlapAdd(const Tensor &frames, int64_t hop, int64_t original_len,
                  SynthesisWindow window) {
  if (frames.rank() < 2) {
    throw ShapeError("overlap_add: expected [..., T x L], got " +
                     ShapeString(frames.shape()));
  }
  const int64_t t = frames.dim(-2), l = frames.dim(-1);
  if (hop <= 0) throw ConfigError("overlap_add: hop must be positive");
  const int64_t full = t == 0 ? 0 : (t - 1) * hop + l;
  if (original_len > full || original_len < 1) {
    throw ShapeError("overlap_add: " + std::to_string(t) + " frames cannot cover " +
                     std::to_string(original_len) + " samples");
  }
  const std::vector<double> win = SynthesisWindowValues(l, window);
  std::vector<double> inv_env(original_len, 0.0);
  for (int64_t f = 0; f < t; ++f) {
    for (int64_t k = 0; k < l; ++k) {
      const int64_t n = f * hop + k;
      if (n < original_len) inv_env[n] += win[k];
    }
  }
  for (double &e : inv_env) {
    if (e < 1e-8) {
      throw ConfigError("overlap_add: window envelope below 1e-8 (COLA fails)");
    }
    e = 1.0 / e;
  }
  Tensor windowed = window == SynthesisWindow::kRectangular
                        ? frames
                        : Mul(frames, Tensor({l}, win));
  Tensor summed = Slice(OverlapAddSum(windowed, hop), -1, 0, original_len);
  return Mul(summed, Tensor({original_len}, std::move(inv_env)));
}

Tensor StackFeatureContext(const Tensor &features, int64_t context) {
  if (context < 0) throw ConfigError("feature context must be >= 0");
  if (features.rank() < 2) {
    throw ShapeError("stack_feature_context: expected [..., T x N], got " +
                     ShapeString(features.shape()));
  }
  const int time_axis = features.rank() - 2;
  const int64_t t = features.dim(time_axis);
  const Tensor padded = Pad(features, time_axis, context, context);
  std::vector<Tensor> rows;
  rows.reserve(2 * context + 1);
  for (int64_t j = 0; j <= 2 * context; ++j) {
    rows.push_back(Slice(padded, time_axis, j, t));
  }
  return Stack(rows, time_axis + 1);
}

}  // namespace ifasnet
