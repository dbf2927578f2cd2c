// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ifasnet/wav.h"

#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "ifasnet/error.h"

namespace ifasnet {

namespace {

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;
constexpr uint16_t kFormatExtensible = 0xFFFE;

uint32_t U32(const unsigned char *p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
uint16_t U16(const unsigned char *p) { return static_cast<uint16_t>(p[0] | (p[1] << 8)); }

void PutU32(std::string &out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void PutU16(std::string &out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace

Audio ReadWav(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError(path + ": not a RIFF/WAVE file");
  }
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  const unsigned char *data = nullptr;
  size_t data_len = 0;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char *chunk = bytes.data() + pos;
    const size_t len = U32(chunk + 4);
    const size_t body = pos + 8;
    if (body + len > bytes.size()) {
      // Tolerate a data chunk truncated by a writer that never patched sizes.
      if (std::memcmp(chunk, "data", 4) != 0) {
        throw FormatError(path + ": truncated chunk");
      }
    }
    const size_t avail = std::min(len, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) throw FormatError(path + ": short fmt chunk");
      format = U16(chunk + 8);
      channels = U16(chunk + 10);
      rate = U32(chunk + 12);
      bits = U16(chunk + 22);
      if (format == kFormatExtensible && avail >= 26) {
        format = U16(chunk + 32);
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_len = avail;
    }
    pos = body + len + (len & 1);
  }
  if (channels == 0 || rate == 0) throw FormatError(path + ": missing fmt chunk");
  if (data == nullptr) throw FormatError(path + ": missing data chunk");
  const bool is_float = format == kFormatFloat && bits == 32;
  const bool is_pcm = format == kFormatPcm && (bits == 16 || bits == 32);
  if (!is_float && !is_pcm) {
    throw FormatError(path + ": unsupported sample format " +
                      std::to_string(format) + "/" + std::to_string(bits));
  }
  const size_t width = bits / 8;
  const int64_t frames = static_cast<int64_t>(data_len / (width * channels));
  std::vector<double> out(static_cast<size_t>(channels) * frames);
  for (int64_t f = 0; f < frames; ++f) {
    for (int64_t c = 0; c < channels; ++c) {
      const unsigned char *p = data + (f * channels + c) * width;
      double v;
      if (is_float) {
        const uint32_t raw = U32(p);
        float x;
        std::memcpy(&x, &raw, 4);
        v = x;
      } else if (bits == 16) {
        v = static_cast<int16_t>(U16(p)) / 32768.0;
      } else {
        v = static_cast<int32_t>(U32(p)) / 2147483648.0;
      }
      out[c * frames + f] = v;
    }
  }
  return {static_cast<int64_t>(rate), Tensor({channels, frames}, std::move(out))};
}

void WriteWav(const std::string &path, const Audio &audio) {
  if (audio.samples.rank() != 2) {
    throw ShapeError("write_wav: expected [channels x frames]");
  }
  const int64_t channels = audio.channels(), frames = audio.frames();
  const uint32_t data_len = static_cast<uint32_t>(channels * frames * 4);
  std::string out;
  out.reserve(44 + data_len);
  out += "RIFF";
  PutU32(out, 36 + data_len);
  out += "WAVEfmt ";
  PutU32(out, 16);
  PutU16(out, kFormatFloat);
  PutU16(out, static_cast<uint16_t>(channels));
  PutU32(out, static_cast<uint32_t>(audio.sample_rate));
  PutU32(out, static_cast<uint32_t>(audio.sample_rate * channels * 4));
  PutU16(out, static_cast<uint16_t>(channels * 4));
  PutU16(out, 32);
  out += "data";
  PutU32(out, data_len);
  const auto &v = audio.samples.values();
  for (int64_t f = 0; f < frames; ++f) {
    for (int64_t c = 0; c < channels; ++c) {
      const float x = static_cast<float>(v[c * frames + f]);
      uint32_t raw;
      std::memcpy(&raw, &x, 4);
      PutU32(out, raw);
    }
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot write " + path);
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw IoError("write failed for " + path);
}

}  // namespace ifasnet
