// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ifasnet/model.h"

#include <cmath>

#include "ifasnet/beamformer.h"
#include "ifasnet/error.h"
#include "ifasnet/ops.h"

namespace ifasnet {

namespace {

struct PresetToggles {
  const char *name;
  bool miso, implicit, fncc, context;
};

constexpr PresetToggles kPresets[] = {
    {"fasnet", false, false, false, false},
    {"fasnet-miso", true, false, false, false},
    {"fasnet-fncc", false, false, true, false},
    {"fasnet-miso-fncc", true, false, true, false},
    {"fasnet-miso-implicit", true, true, false, false},
    {"ifasnet-nocontext", true, true, true, false},
    {"ifasnet", true, true, true, true},
};

constexpr double kConfigVersion = 1.0;

}  // namespace

void ModelConfig::Validate() const {
  framing.Validate();
  if (context && !implicit) {
    throw ConfigError("context filtering requires implicit filtering");
  }
  if (implicit && !miso) {
    throw ConfigError("implicit filtering requires the MISO formulation");
  }
  if (n_sources < 1 || feature_dim < 1 || hidden < 1 || n_blocks < 0 ||
      codec_hidden < 1 || sample_rate < 1) {
    throw ConfigError("model sizes must be positive");
  }
  if (chunk_len < 2) throw ConfigError("chunk_len must be at least 2");
  if (min_mics < 1 || max_mics < min_mics) {
    throw ConfigError("invalid microphone range");
  }
  if (ref_channel < 0 || ref_channel >= min_mics) {
    throw ConfigError("reference channel must exist for every supported array");
  }
}

int64_t ModelConfig::ncc_dim() const {
  return ncc == NccKind::kTime ? framing.tncc_dim()
                               : framing.context_rows() * framing.context_rows();
}

int64_t ModelConfig::filter_dim() const {
  return implicit ? feature_dim : framing.tncc_dim();
}

SeparatorConfig ModelConfig::separator() const {
  SeparatorConfig s;
  s.n_sources = n_sources;
  s.n_blocks = n_blocks;
  s.hidden = hidden;
  s.chunk_len = chunk_len;
  s.feature_dim = feature_dim;
  s.input_dim = feature_dim + ncc_dim();
  s.filter_dim = filter_dim();
  s.miso = miso;
  return s;
}

std::string ModelConfig::Describe() const {
  std::string out = miso ? "MISO" : "MIMO";
  out += implicit ? " implicit" : " explicit";
  out += ncc == NccKind::kTime ? " tNCC" : " fNCC";
  out += context ? " context" : " no-context";
  return out;
}

const std::vector<std::string> &PresetNames() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto &p : kPresets) v.emplace_back(p.name);
    return v;
  }();
  return names;
}

ModelConfig Preset(const std::string &name) {
  for (const auto &p : kPresets) {
    if (name == p.name) {
      ModelConfig cfg;
      cfg.miso = p.miso;
      cfg.implicit = p.implicit;
      cfg.ncc = p.fncc ? NccKind::kFeature : NccKind::kTime;
      cfg.context = p.context;
      return cfg;
    }
  }
  throw ConfigError("unknown preset '" + name + "'");
}

std::string PresetFor(const ModelConfig &cfg) {
  for (const auto &p : kPresets) {
    if (cfg.miso == p.miso && cfg.implicit == p.implicit &&
        (cfg.ncc == NccKind::kFeature) == p.fncc && cfg.context == p.context) {
      return p.name;
    }
  }
  return "";
}

std::vector<double> EncodeConfig(const ModelConfig &c) {
  const auto d = [](auto v) { return static_cast<double>(v); };
  return {kConfigVersion,
          d(c.framing.frame_len),
          d(c.framing.hop),
          d(c.framing.sample_context),
          d(c.framing.feature_context),
          d(c.miso),
          d(c.implicit),
          d(c.ncc == NccKind::kFeature),
          d(c.context),
          d(c.n_sources),
          d(c.feature_dim),
          d(c.hidden),
          d(c.n_blocks),
          d(c.chunk_len),
          d(c.codec_hidden),
          d(c.codec == ContextCodecKind::kMlp),
          d(c.ref_channel),
          d(c.sample_rate),
          d(c.min_mics),
          d(c.max_mics)};
}

ModelConfig DecodeConfig(const std::vector<double> &v) {
  if (v.size() != 20 || v[0] != kConfigVersion) {
    throw FormatError("unrecognized model configuration record");
  }
  for (double x : v) {
    if (!std::isfinite(x) || x != std::floor(x)) {
      throw FormatError("model configuration holds a non-integer value");
    }
  }
  const auto i = [&](size_t k) { return static_cast<int64_t>(v[k]); };
  ModelConfig c;
  c.framing.frame_len = i(1);
  c.framing.hop = i(2);
  c.framing.sample_context = i(3);
  c.framing.feature_context = i(4);
  c.miso = v[5] != 0;
  c.implicit = v[6] != 0;
  c.ncc = v[7] != 0 ? NccKind::kFeature : NccKind::kTime;
  c.context = v[8] != 0;
  c.n_sources = i(9);
  c.feature_dim = i(10);
  c.hidden = i(11);
  c.n_blocks = i(12);
  c.chunk_len = i(13);
  c.codec_hidden = i(14);
  c.codec = v[15] != 0 ? ContextCodecKind::kMlp : ContextCodecKind::kRnn;
  c.ref_channel = i(16);
  c.sample_rate = i(17);
  c.min_mics = i(18);
  c.max_mics = i(19);
  c.Validate();
  return c;
}

Model::Model(const ModelConfig &cfg, uint64_t seed) : cfg_(cfg) {
  cfg_.Validate();
  Rng rng(seed);
  const FramingConfig &fr = cfg_.framing;
  const int64_t n = cfg_.feature_dim;
  if (cfg_.implicit) {
    const double b = 1.0 / std::sqrt(static_cast<double>(fr.frame_len));
    enc_center_ = store_.Add("enc.center", UniformTensor({fr.frame_len, n}, b, rng));
    dec_ = store_.Add("dec.U", UniformTensor({n, fr.frame_len},
                                             1.0 / std::sqrt(static_cast<double>(n)),
                                             rng));
  } else {
    const int64_t lc = fr.context_frame_len();
    enc_ctx_ = store_.Add(
        "enc.ctx",
        UniformTensor({lc, n}, 1.0 / std::sqrt(static_cast<double>(lc)), rng));
  }
  if (cfg_.context) {
    codec_ = RegisterContextCodec(store_, cfg_.codec, n, cfg_.codec_hidden,
                                  fr.context_rows(), rng);
  }
  sep_ = RegisterSeparator(store_, cfg_.separator(), rng);
}

Tensor Model::Forward(const Tensor &mixture) const {
  if (mixture.rank() != 2) {
    throw ShapeError("model: expected mixture [M x samples], got " +
                     ShapeString(mixture.shape()));
  }
  const int64_t m = mixture.dim(0), samples = mixture.dim(1);
  if (m < cfg_.min_mics || m > cfg_.max_mics) {
    throw ShapeError("model: " + std::to_string(m) +
                     " channels outside the supported range [" +
                     std::to_string(cfg_.min_mics) + ", " +
                     std::to_string(cfg_.max_mics) + "]");
  }
  const FramingConfig &fr = cfg_.framing;
  const int64_t ref = cfg_.ref_channel, c = fr.feature_context;
  auto [frames, ctx] = SplitFrames(mixture, fr);

  Tensor channel_feat;  // [M x T x N]
  Tensor stacked;       // [M x T x P x N]
  if (cfg_.implicit) {
    channel_feat = EncodeCenterFrames(frames, enc_center_);
  } else {
    channel_feat = EncodeContextFrames(ctx, enc_ctx_);
  }
  if (cfg_.ncc == NccKind::kFeature || cfg_.context) {
    stacked = StackFeatureContext(channel_feat, c);
  }
  const Tensor ncc = cfg_.ncc == NccKind::kTime
                         ? Tncc(Select(frames.frames, 0, ref), ctx).values
                         : Fncc(stacked, ref).values;
  const Tensor sep_channel =
      cfg_.context ? ContextEncode(stacked, codec_) : channel_feat;
  const Tensor g = Separate(Concat({sep_channel, ncc}, 2), cfg_.separator(),
                            sep_, ref);  // [S x M' x T x K]

  if (!cfg_.implicit) {
    return RenderFrames(ExplicitFilterAndSum(ctx.frames, g, ref), fr, samples);
  }
  const Tensor g_ref = Select(g, 1, 0);               // [S x T x N]
  const Tensor f_ref = Select(channel_feat, 0, ref);  // [T x N]
  Tensor filters = g_ref;
  if (cfg_.context) {
    const Tensor f_ctx = Repeat(Select(stacked, 0, ref), 0, cfg_.n_sources);
    filters = ContextDecode(f_ctx, g_ref, codec_);  // [S x T x P x N]
  }
  return RenderLatent(ImplicitFilter(f_ref, filters, cfg_.context ? c : 0), dec_,
                      fr, samples);
}

}  // namespace ifasnet
