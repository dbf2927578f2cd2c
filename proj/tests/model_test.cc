// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ifasnet/model.h"

#include <gtest/gtest.h>

#include <set>

#include "ifasnet/gradcheck.h"
#include "ifasnet/ops.h"
#include "test_util.h"

namespace ifasnet {
namespace {

using test::RandomTensor;

class ModelTest : public ::testing::Test {
 protected:
  void SetUp() override { CurrentTape().Reset(); }
};

// Preset toggles with every size shrunk for fast exhaustive checks.
ModelConfig Tiny(const std::string &preset) {
  ModelConfig cfg = Preset(preset);
  cfg.framing = {.frame_len = 8, .hop = 4, .sample_context = 8,
                 .feature_context = 2};
  cfg.feature_dim = 4;
  cfg.hidden = 3;
  cfg.n_blocks = 1;
  cfg.chunk_len = 4;
  cfg.codec_hidden = 3;
  return cfg;
}

Tensor PermuteChannels(const Tensor &x, const std::vector<int64_t> &perm) {
  std::vector<Tensor> parts;
  for (int64_t p : perm) parts.push_back(Select(x, 0, p));
  return Stack(parts, 0);
}

TEST_F(ModelTest, PresetTableIsBijective) {
  const auto &names = PresetNames();
  ASSERT_EQ(names.size(), 7u);
  std::set<std::string> seen;
  for (const std::string &name : names) {
    ModelConfig cfg = Preset(name);
    EXPECT_NO_THROW(cfg.Validate()) << name;
    EXPECT_EQ(PresetFor(cfg), name);
    EXPECT_TRUE(seen.insert(cfg.Describe()).second) << name;
  }
  EXPECT_THROW(Preset("nope"), ConfigError);
}

TEST_F(ModelTest, PresetTogglesMatchRowLabels) {
  EXPECT_EQ(Preset("fasnet").Describe(), "MIMO explicit tNCC no-context");
  EXPECT_EQ(Preset("fasnet-miso").Describe(), "MISO explicit tNCC no-context");
  EXPECT_EQ(Preset("fasnet-fncc").Describe(), "MIMO explicit fNCC no-context");
  EXPECT_EQ(Preset("fasnet-miso-fncc").Describe(), "MISO explicit fNCC no-context");
  EXPECT_EQ(Preset("fasnet-miso-implicit").Describe(),
            "MISO implicit tNCC no-context");
  EXPECT_EQ(Preset("ifasnet-nocontext").Describe(), "MISO implicit fNCC no-context");
  EXPECT_EQ(Preset("ifasnet").Describe(), "MISO implicit fNCC context");
}

TEST_F(ModelTest, InconsistentTogglesRejected) {
  ModelConfig cfg = Preset("fasnet");
  cfg.context = true;
  EXPECT_THROW(cfg.Validate(), ConfigError);
  cfg = Preset("fasnet");
  cfg.implicit = true;
  EXPECT_THROW(cfg.Validate(), ConfigError);
  cfg = Preset("ifasnet");
  cfg.ref_channel = 2;
  EXPECT_THROW(cfg.Validate(), ConfigError);
}

TEST_F(ModelTest, ConfigRoundTripsThroughEncoding) {
  for (const std::string &name : PresetNames()) {
    ModelConfig cfg = Tiny(name);
    cfg.ref_channel = 1;
    ModelConfig back = DecodeConfig(EncodeConfig(cfg));
    EXPECT_EQ(EncodeConfig(back), EncodeConfig(cfg));
  }
  std::vector<double> bad = EncodeConfig(Preset("ifasnet"));
  bad[0] = 99;
  EXPECT_THROW(DecodeConfig(bad), FormatError);
}

TEST_F(ModelTest, ExplicitAndImplicitSizesAreClose) {
  const double a = static_cast<double>(Model(Preset("fasnet"), 1).NumParameters());
  const double b = static_cast<double>(Model(Preset("ifasnet"), 1).NumParameters());
  EXPECT_LT(std::abs(a - b) / std::max(a, b), 0.10) << a << " vs " << b;
}

TEST_F(ModelTest, CheckpointNamesFollowConvention) {
  Model explicit_model(Preset("fasnet"), 1);
  EXPECT_TRUE(explicit_model.params().Contains("enc.ctx"));
  EXPECT_FALSE(explicit_model.params().Contains("dec.U"));
  Model full(Preset("ifasnet"), 1);
  EXPECT_TRUE(full.params().Contains("enc.center"));
  EXPECT_TRUE(full.params().Contains("dec.U"));
  EXPECT_TRUE(full.params().Contains("ctxcodec.enc.rnn1.fwd.w_hh"));
  EXPECT_TRUE(full.params().Contains("sep.head0.weight"));
}

TEST_F(ModelTest, EveryPresetRunsOnTwoToSixMics) {
  for (const std::string &name : PresetNames()) {
    Model model(Tiny(name), 3);
    for (int64_t m = 2; m <= 6; ++m) {
      Tensor y = model.Forward(RandomTensor({m, 37}, m));
      ASSERT_EQ(y.shape(), (Shape{2, 37})) << name << " M=" << m;
      for (double v : y.data()) ASSERT_TRUE(std::isfinite(v));
    }
    EXPECT_THROW(model.Forward(RandomTensor({1, 37}, 1)), ShapeError);
    EXPECT_THROW(model.Forward(RandomTensor({7, 37}, 1)), ShapeError);
  }
}

TEST_F(ModelTest, OutputInvariantToChannelOrderWithTrackedReference) {
  for (const std::string &name : PresetNames()) {
    ModelConfig cfg = Tiny(name);
    cfg.min_mics = 3;
    Model a(cfg, 5);
    cfg.ref_channel = 2;
    Model b(cfg, 5);
    Tensor x = RandomTensor({3, 41}, 6);
    // Original channel 0 ends up at position 2.
    Tensor permuted = PermuteChannels(x, {1, 2, 0});
    EXPECT_EQ(a.Forward(x).values(), b.Forward(permuted).values()) << name;
  }
}

TEST_F(ModelTest, ForwardIsDeterministic) {
  Model a(Tiny("ifasnet"), 9);
  Model b(Tiny("ifasnet"), 9);
  Tensor x = RandomTensor({2, 30}, 1);
  EXPECT_EQ(a.Forward(x).values(), b.Forward(x).values());
}

TEST_F(ModelTest, EveryPresetPassesGradientCheck) {
  for (const std::string &name : PresetNames()) {
    Model model(Tiny(name), 11);
    test::RandomizeParams(model.params().Tensors(), 11);
    Tensor x = RandomTensor({2, 21}, 12);
    GradCheckReport r = CheckGradients(
        [&] { return test::Probe(model.Forward(x), 13); },
        model.params().Tensors());
    EXPECT_TRUE(r.passed) << name << ": " << r.Summary();
  }
}

}  // namespace
}  // namespace ifasnet
