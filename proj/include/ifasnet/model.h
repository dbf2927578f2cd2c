// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// End-to-end separation model covering the explicit filter-and-sum baseline
// and its MISO / implicit / fNCC / context variants.

#ifndef IFASNET_MODEL_H_
#define IFASNET_MODEL_H_

#include <string>
#include <vector>

#include "ifasnet/features.h"
#include "ifasnet/framing.h"
#include "ifasnet/params.h"
#include "ifasnet/separator.h"
#include "ifasnet/tensor.h"

namespace ifasnet {

struct ModelConfig {
  FramingConfig framing;
  bool miso = false;
  bool implicit = false;
  NccKind ncc = NccKind::kTime;
  bool context = false;
  int64_t n_sources = 2;
  int64_t feature_dim = 64;  // N
  int64_t hidden = 64;
  int64_t n_blocks = 2;
  int64_t chunk_len = 24;
  int64_t codec_hidden = 32;
  ContextCodecKind codec = ContextCodecKind::kRnn;
  int64_t ref_channel = 0;
  int64_t sample_rate = 16000;
  int64_t min_mics = 2;
  int64_t max_mics = 6;

  // Throws ConfigError on an inconsistent configuration. Context filtering
  // requires implicit filtering, which requires MISO.
  void Validate() const;
  // Width of the cross-channel feature.
  int64_t ncc_dim() const;
  // Width of each estimated filter.
  int64_t filter_dim() const;
  SeparatorConfig separator() const;
  // Human-readable toggle summary, e.g. "MISO implicit fNCC context".
  std::string Describe() const;
};

// Names of the seven ablation presets, baseline first.
const std::vector<std::string> &PresetNames();
// Toy-sized configuration for `name`; throws ConfigError if unknown.
ModelConfig Preset(const std::string &name);
// Preset whose toggles equal cfg's, or "" when none matches.
std::string PresetFor(const ModelConfig &cfg);

// Flat numeric encoding used to store a configuration inside a checkpoint.
std::vector<double> EncodeConfig(const ModelConfig &cfg);
ModelConfig DecodeConfig(const std::vector<double> &values);

class Model {
 public:
  Model(const ModelConfig &cfg, uint64_t seed);

  // mixture: [M x samples] -> [n_sources x samples]. Throws ShapeError when M
  // is outside [min_mics, max_mics].
  Tensor Forward(const Tensor &mixture) const;

  const ModelConfig &config() const { return cfg_; }
  ParamStore &params() { return store_; }
  const ParamStore &params() const { return store_; }
  int64_t NumParameters() const { return store_.NumParameters(); }

 private:
  ModelConfig cfg_;
  ParamStore store_;
  Tensor enc_ctx_;     // [(L + 2W) x N], explicit path
  Tensor enc_center_;  // [L x N], implicit path
  Tensor dec_;         // [N x L], implicit path
  ContextCodecParams codec_;
  SeparatorParams sep_;
};

}  // namespace ifasnet

#endif  // IFASNET_MODEL_H_
