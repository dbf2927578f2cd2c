// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef IFASNET_FRAMING_H_
#define IFASNET_FRAMING_H_

#include <utility>
#include <vector>

#include "ifasnet/tensor.h"

namespace ifasnet {

struct FramingConfig {
  int64_t frame_len = 256;       // L
  int64_t hop = 128;             // 50% overlap
  int64_t sample_context = 256;  // W, samples on each side
  int64_t feature_context = 2;   // C, frames on each side; W / hop

  // Throws ConfigError on non-positive sizes, hop > L, or C != W / hop.
  void Validate() const;
  int64_t context_frame_len() const { return frame_len + 2 * sample_context; }
  int64_t tncc_dim() const { return 1 + 2 * sample_context; }
  int64_t context_rows() const { return 1 + 2 * feature_context; }
};

// frames: [M x T x L]. Frame t covers samples [t * hop, t * hop + L).
struct FrameSet {
  Tensor frames;
  int64_t original_len = 0;
  int64_t pad_front = 0;
  int64_t pad_back = 0;
};

// frames: [M x T x (L + 2W)]. Frame t covers [t * hop - W, t * hop + L + W),
// zero outside the signal.
struct ContextFrameSet {
  Tensor frames;
};

int64_t NumFrames(int64_t samples, int64_t hop);

// signal: [M x samples].
std::pair<FrameSet, ContextFrameSet> SplitFrames(const Tensor &signal,
                                                 const FramingConfig &cfg);

enum class SynthesisWindow { kHann, kRectangular };

// Length-L synthesis window. kHann is sin^2(pi (n + 1/2) / L), a half-sample
// shifted periodic Hann whose 50%-overlap sum is exactly one and which has no
// zero taps.
std::vector<double> SynthesisWindowValues(int64_t frame_len,
                                          SynthesisWindow window);

// Windowed overlap-add of frames [..., T x L] normalized by the summed
// window envelope, truncated to original_len. Reconstructs x exactly from
// the (unwindowed) center frames of SplitFrames. Differentiable in `frames`.
// Throws ConfigError if the envelope drops below 1e-8 anywhere.
Tensor OverlapAdd(const Tensor &frames, int64_t hop, int64_t original_len,
                  SynthesisWindow window = SynthesisWindow::kHann);

// features: [..., T x N] -> [..., T x (1 + 2C) x N]; row j of frame t holds
// frame t - C + j, zero outside [0, T). Differentiable.
Tensor StackFeatureContext(const Tensor &features, int64_t context);

}  // namespace ifasnet

#endif  // IFASNET_FRAMING_H_
