// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ifasnet/separator.h"

#include <gtest/gtest.h>

#include "ifasnet/gradcheck.h"
#include "ifasnet/ops.h"
#include "test_util.h"

namespace ifasnet {
namespace {

using test::RandomTensor;

class SeparatorTest : public ::testing::Test {
 protected:
  void SetUp() override { CurrentTape().Reset(); }

  static SeparatorConfig Small(bool miso) {
    SeparatorConfig cfg;
    cfg.n_sources = 2;
    cfg.n_blocks = 1;
    cfg.hidden = 3;
    cfg.chunk_len = 4;
    cfg.feature_dim = 4;
    cfg.input_dim = 5;
    cfg.filter_dim = 3;
    cfg.miso = miso;
    return cfg;
  }

  // Channel permutation of a [M x ...] tensor: out[i] = x[perm[i]].
  static Tensor PermuteChannels(const Tensor &x, const std::vector<int64_t> &perm) {
    std::vector<Tensor> parts;
    for (int64_t p : perm) parts.push_back(Select(x, 0, p));
    return Stack(parts, 0);
  }
};

TEST_F(SeparatorTest, ChunkCountArithmetic) {
  EXPECT_EQ(NumChunks(24, 24), 2);
  EXPECT_EQ(NumChunks(1, 24), 1);
  EXPECT_EQ(NumChunks(25, 24), 3);
  Tensor c = SegmentChunks(RandomTensor({2, 24, 3}, 1), 24);
  EXPECT_EQ(c.shape(), (Shape{2, 2, 24, 3}));
  EXPECT_THROW(SegmentChunks(RandomTensor({2, 5, 3}, 1), 1), ConfigError);
}

TEST_F(SeparatorTest, ChunkIndexOracle) {
  Tensor x = RandomTensor({2, 11, 3}, 2);
  const int64_t k = 4, hop = 2;
  Tensor c = SegmentChunks(x, k);
  ASSERT_EQ(c.shape(), (Shape{2, 6, 4, 3}));
  for (int64_t m = 0; m < 2; ++m)
    for (int64_t s = 0; s < 6; ++s)
      for (int64_t j = 0; j < k; ++j)
        for (int64_t d = 0; d < 3; ++d) {
          const int64_t t = s * hop + j;
          ASSERT_EQ(c.at({m, s, j, d}), t < 11 ? x.at({m, t, d}) : 0.0);
        }
}

TEST_F(SeparatorTest, ChunkRoundTrip) {
  for (uint64_t seed = 0; seed < 8; ++seed) {
    const int64_t t = 1 + static_cast<int64_t>(seed) * 7;
    Tensor x = RandomTensor({3, t, 2}, seed);
    for (int64_t k : {2, 5, 24}) {
      Tensor y = MergeChunks(SegmentChunks(x, k), t);
      EXPECT_LT(test::MaxAbsDiff(y.data(), x.data()), 1e-15) << t << " " << k;
    }
  }
  Tensor z = MergeChunks(SegmentChunks(Tensor::Zeros({1, 9, 2}), 4), 9);
  EXPECT_EQ(z.values(), std::vector<double>(18, 0.0));
}

TEST_F(SeparatorTest, TacZeroParamsIsPassthrough) {
  ParamStore store;
  Rng rng(1);
  SeparatorConfig cfg = Small(false);
  SeparatorParams p = RegisterSeparator(store, cfg, rng);
  TacWeights tac = p.blocks[0].tac;
  for (Tensor *t : {&tac.transform.weight, &tac.transform.bias,
                    &tac.average.weight, &tac.average.bias, &tac.concat.weight,
                    &tac.concat.bias}) {
    *t = Tensor::Zeros(t->shape());
  }
  Tensor x = RandomTensor({3, 2, 4, 4}, 3);
  EXPECT_EQ(TacLayer(x, tac).values(), x.values());
}

TEST_F(SeparatorTest, TacSingleChannelAveragesItself) {
  ParamStore store;
  Rng rng(2);
  TacWeights w = RegisterSeparator(store, Small(false), rng).blocks[0].tac;
  Tensor x = RandomTensor({1, 5, 4}, 4);
  Tensor h = Tanh(ApplyLinear(x, w.transform));
  Tensor avg = Tanh(ApplyLinear(h, w.average));
  Tensor expected =
      Add(x, Tanh(ApplyLinear(Concat({h, avg}, 2), w.concat)));
  EXPECT_LT(test::MaxAbsDiff(TacLayer(x, w).data(), expected.data()), 1e-15);
}

TEST_F(SeparatorTest, TacIsChannelPermutationEquivariant) {
  ParamStore store;
  Rng rng(3);
  TacWeights w = RegisterSeparator(store, Small(false), rng).blocks[0].tac;
  Tensor x = RandomTensor({3, 2, 5, 4}, 5);
  const std::vector<int64_t> perm = {1, 0, 2};
  Tensor a = PermuteChannels(TacLayer(x, w), perm);
  Tensor b = TacLayer(PermuteChannels(x, perm), w);
  EXPECT_EQ(a.values(), b.values());
}

TEST_F(SeparatorTest, MisoOutputHasOneChannelForAnyArray) {
  ParamStore store;
  Rng rng(4);
  SeparatorConfig cfg = Small(true);
  SeparatorParams p = RegisterSeparator(store, cfg, rng);
  for (int64_t m = 2; m <= 6; ++m) {
    Tensor g = Separate(RandomTensor({m, 9, 5}, m), cfg, p);
    EXPECT_EQ(g.shape(), (Shape{2, 1, 9, 3}));
  }
}

TEST_F(SeparatorTest, MimoOutputTracksChannelCount) {
  ParamStore store;
  Rng rng(5);
  SeparatorConfig cfg = Small(false);
  SeparatorParams p = RegisterSeparator(store, cfg, rng);
  EXPECT_EQ(Separate(RandomTensor({2, 7, 5}, 1), cfg, p).shape(),
            (Shape{2, 2, 7, 3}));
  EXPECT_EQ(Separate(RandomTensor({4, 7, 5}, 1), cfg, p).shape(),
            (Shape{2, 4, 7, 3}));
}

TEST_F(SeparatorTest, StackIsChannelPermutationEquivariant) {
  ParamStore store;
  Rng rng(6);
  SeparatorConfig cfg = Small(false);
  cfg.n_blocks = 2;
  SeparatorParams p = RegisterSeparator(store, cfg, rng);
  Tensor x = RandomTensor({3, 10, 5}, 7);
  const std::vector<int64_t> perm = {1, 2, 0};
  Tensor mimo = Separate(x, cfg, p);
  Tensor mimo_perm = Separate(PermuteChannels(x, perm), cfg, p);
  EXPECT_EQ(PermuteChannels(Permute(mimo, {1, 0, 2, 3}), perm).values(),
            Permute(mimo_perm, {1, 0, 2, 3}).values());

  // MISO: the reference moves from position 0 to the position now holding
  // original channel 0.
  ParamStore store2;
  Rng rng2(6);
  SeparatorConfig miso_cfg = cfg;
  miso_cfg.miso = true;
  SeparatorParams q = RegisterSeparator(store2, miso_cfg, rng2);
  Tensor ref = Separate(x, miso_cfg, q, 0);
  Tensor moved = Separate(PermuteChannels(x, perm), miso_cfg, q, 2);
  EXPECT_EQ(ref.values(), moved.values());
}

TEST_F(SeparatorTest, GradientThroughOneBlock) {
  ParamStore store;
  Rng rng(8);
  SeparatorConfig cfg = Small(true);
  SeparatorParams p = RegisterSeparator(store, cfg, rng);
  test::RandomizeParams(store.Tensors(), 8);
  Tensor x = RandomTensor({2, 6, 5}, 9);
  x.set_requires_grad(true);
  std::vector<Tensor> params = store.Tensors();
  params.push_back(x);
  GradCheckReport r = CheckGradients(
      [&] { return test::Probe(Separate(x, cfg, p), 10); }, params);
  EXPECT_TRUE(r.passed) << r.Summary();
}

TEST_F(SeparatorTest, RejectsMismatchedInputs) {
  ParamStore store;
  Rng rng(9);
  SeparatorConfig cfg = Small(true);
  SeparatorParams p = RegisterSeparator(store, cfg, rng);
  EXPECT_THROW(Separate(RandomTensor({2, 6, 4}, 1), cfg, p), ShapeError);
  EXPECT_THROW(Separate(RandomTensor({2, 6, 5}, 1), cfg, p, 2), ShapeError);
  SeparatorConfig other = cfg;
  other.n_blocks = 2;
  EXPECT_THROW(Separate(RandomTensor({2, 6, 5}, 1), other, p), ConfigError);
  other = cfg;
  other.chunk_len = 1;
  EXPECT_THROW(other.Validate(), ConfigError);
}

TEST_F(SeparatorTest, ParameterNamesFollowConvention) {
  ParamStore store;
  Rng rng(10);
  RegisterSeparator(store, Small(false), rng);
  EXPECT_TRUE(store.Contains("sep.block0.intra.rnn.fwd.w_ih"));
  EXPECT_TRUE(store.Contains("sep.block0.inter.proj.weight"));
  EXPECT_TRUE(store.Contains("sep.block0.tac.concat.bias"));
  EXPECT_TRUE(store.Contains("sep.head1.weight"));
  // TAC: F*3F + 3F, 3F*3F + 3F, 6F*F + F with F = 4.
  int64_t tac = 0;
  for (const auto &[name, t] : store.entries()) {
    if (name.find(".tac.") != std::string::npos) tac += t.numel();
  }
  EXPECT_EQ(tac, 4 * 12 + 12 + 12 * 12 + 12 + 24 * 4 + 4);
}

}  // namespace
}  // namespace ifasnet
