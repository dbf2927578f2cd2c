// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef IFASNET_WAV_H_
#define IFASNET_WAV_H_

#include <string>

#include "ifasnet/tensor.h"

namespace ifasnet {

struct Audio {
  int64_t sample_rate = 16000;
  Tensor samples;  // [channels x frames]

  int64_t channels() const { return samples.dim(0); }
  int64_t frames() const { return samples.dim(1); }
};

// Reads RIFF/WAVE with 32-bit float or 16/32-bit integer PCM. Throws IoError
// when the file cannot be opened and FormatError on malformed content.
Audio ReadWav(const std::string &path);

// Writes 32-bit float PCM, channel-interleaved. Throws IoError.
void WriteWav(const std::string &path, const Audio &audio);

}  // namespace ifasnet

#endif  // IFASNET_WAV_H_
