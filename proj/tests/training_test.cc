// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ifasnet/training.h"

#include <gtest/gtest.h>
#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ifasnet/gradcheck.h"
#include "ifasnet/ops.h"
#include "test_util.h"

namespace ifasnet {
namespace {

namespace fs = std::filesystem;
using test::RandomTensor;
using test::RandomVector;

class TrainingTest : public ::testing::Test {
 protected:
  void SetUp() override { CurrentTape().Reset(); }
};

ModelConfig Tiny(const std::string &preset) {
  ModelConfig cfg = Preset(preset);
  cfg.framing = {.frame_len = 8, .hop = 4, .sample_context = 8, .feature_context = 2};
  cfg.feature_dim = 4;
  cfg.hidden = 3;
  cfg.n_blocks = 1;
  cfg.chunk_len = 4;
  cfg.codec_hidden = 3;
  return cfg;
}

Example RandomExample(int64_t mics, int64_t samples, uint64_t seed) {
  Example ex;
  ex.id = "rand" + std::to_string(seed);
  ex.targets = RandomTensor({2, mics, samples}, seed, -0.5, 0.5);
  std::vector<double> mix(mics * samples);
  for (int64_t i = 0; i < mics * samples; ++i) {
    mix[i] = ex.targets.data()[i] + ex.targets.data()[mics * samples + i];
  }
  ex.mixture = Tensor({mics, samples}, std::move(mix));
  return ex;
}

double HandSnrLoss(const std::vector<double> &est, const std::vector<double> &ref) {
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < est.size(); ++i) {
    num += ref[i] * ref[i];
    den += (est[i] - ref[i]) * (est[i] - ref[i]);
  }
  return -10.0 * std::log10(num / (den + 1e-8));
}

TEST_F(TrainingTest, SnrLossExamples) {
  const auto ref = RandomVector(200, 1);
  const Tensor r({200}, ref);
  const double power = [&] {
    double p = 0;
    for (double v : ref) p += v * v;
    return p;
  }();
  EXPECT_NEAR(SnrLoss(r, r).item(), -10.0 * std::log10(power / 1e-8), 1e-9);
  EXPECT_NEAR(SnrLoss(Tensor::Zeros({200}), r).item(), -10.0 * std::log10(power / (power + 1e-8)),
              1e-12);
  EXPECT_NEAR(SnrLoss(Tensor::Zeros({200}), r).item(), 0.0, 1e-8);
  const auto est = RandomVector(200, 2);
  EXPECT_NEAR(SnrLoss(Tensor({200}, est), r).item(), HandSnrLoss(est, ref), 1e-12);
  EXPECT_THROW(SnrLoss(r, Tensor::Zeros({200})), NumericError);
  EXPECT_THROW(SnrLoss(Tensor::Zeros({199}), r), ShapeError);
}

TEST_F(TrainingTest, SnrLossGradient) {
  Tensor est = RandomTensor({50}, 3);
  est.set_requires_grad(true);
  const Tensor ref = RandomTensor({50}, 4);
  GradCheckReport rep = CheckGradients([&] { return SnrLoss(est, ref); }, {est});
  EXPECT_TRUE(rep.passed) << rep.Summary();
}

// SI-SDR from an explicit least-squares fit of the reference onto the
// estimate's span, without the closed form.
double BruteSiSdr(std::vector<double> est, std::vector<double> ref) {
  auto center = [](std::vector<double> &x) {
    double m = 0;
    for (double v : x) m += v;
    m /= x.size();
    for (double &v : x) v -= m;
  };
  center(est);
  center(ref);
  // Minimize |est - a ref|^2 over a by bisecting on the sign of its slope.
  auto slope = [&](double a) {
    double d = 0;
    for (size_t i = 0; i < est.size(); ++i) d += ref[i] * (a * ref[i] - est[i]);
    return d;
  };
  double lo = -100, hi = 100;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (slope(mid) > 0) hi = mid; else lo = mid;
  }
  const double a = 0.5 * (lo + hi);
  double t = 0, n = 0;
  for (size_t i = 0; i < est.size(); ++i) {
    t += a * ref[i] * a * ref[i];
    n += (est[i] - a * ref[i]) * (est[i] - a * ref[i]);
  }
  return 10 * std::log10(t / n);
}

TEST_F(TrainingTest, SiSdrMatchesProjectionOracle) {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    auto ref = RandomVector(300, seed);
    auto est = RandomVector(300, seed + 100);
    for (size_t i = 0; i < est.size(); ++i) est[i] += 0.7 * ref[i];
    EXPECT_NEAR(SiSdr(est, ref), BruteSiSdr(est, ref), 1e-9);
  }
}

TEST_F(TrainingTest, SiSdrScaleInvarianceAndCaps) {
  const auto ref = RandomVector(400, 5);
  auto est = RandomVector(400, 6);
  for (size_t i = 0; i < est.size(); ++i) est[i] += ref[i];
  const double base = SiSdr(est, ref);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> logscale(-3.0, 3.0);
  for (int k = 0; k < 50; ++k) {
    const double a = std::pow(10.0, logscale(rng)) * (k % 2 ? -1.0 : 1.0);
    std::vector<double> scaled(est);
    for (double &v : scaled) v *= std::abs(a);
    EXPECT_NEAR(SiSdr(scaled, ref), base, 1e-9) << a;
  }
  std::vector<double> twice(ref);
  for (double &v : twice) v *= 2;
  EXPECT_EQ(SiSdr(twice, ref), kSiSdrCapDb);
  // Orthogonal (zero-mean) estimate: projection vanishes.
  std::vector<double> r = {1, -1, 1, -1}, o = {1, 1, -1, -1};
  EXPECT_EQ(SiSdr(o, r), -kSiSdrCapDb);
  EXPECT_THROW(SiSdr(std::vector<double>(4, 0.0), r), NumericError);
  EXPECT_THROW(SiSdr(r, std::vector<double>(4, 3.0)), NumericError);
  EXPECT_NEAR(SiSdrImprovement(est, ref, est), 0.0, 1e-12);
}

TEST_F(TrainingTest, PitFindsBestAssignment) {
  const Tensor refs = RandomTensor({2, 64}, 8);
  const Tensor swapped = Stack({Select(refs, 0, 1), Select(refs, 0, 0)}, 0);
  Tensor noisy = Add(swapped, RandomTensor({2, 64}, 9, -0.05, 0.05));
  PitResult a = PitLoss(noisy, refs);
  PitResult b = PitLoss(Stack({Select(noisy, 0, 1), Select(noisy, 0, 0)}, 0), refs);
  EXPECT_EQ(a.perm, (std::vector<int>{1, 0}));
  EXPECT_EQ(b.perm, (std::vector<int>{0, 1}));
  EXPECT_NEAR(a.loss.item(), b.loss.item(), 1e-12);
  // Identical sources tie; identity wins.
  const Tensor same = Stack({Select(refs, 0, 0), Select(refs, 0, 0)}, 0);
  EXPECT_EQ(PitLoss(same, same).perm, (std::vector<int>{0, 1}));
}

TEST_F(TrainingTest, PitMatchesExhaustiveOracleAndNeverExceedsFixedOrder) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor ests = RandomTensor({2, 40}, seed);
    const Tensor refs = RandomTensor({2, 40}, seed + 50);
    auto pair = [&](int i, int j) {
      return SnrLoss(Select(ests, 0, i), Select(refs, 0, j)).item();
    };
    const double id = 0.5 * (pair(0, 0) + pair(1, 1));
    const double sw = 0.5 * (pair(0, 1) + pair(1, 0));
    const PitResult r = PitLoss(ests, refs);
    EXPECT_NEAR(r.loss.item(), std::min(id, sw), 1e-12);
    EXPECT_LE(r.loss.item(), id + 1e-12);
  }
}

TEST_F(TrainingTest, PitLossGradient) {
  Tensor ests = RandomTensor({2, 30}, 10);
  ests.set_requires_grad(true);
  const Tensor refs = RandomTensor({2, 30}, 11);
  GradCheckReport rep = CheckGradients([&] { return PitLoss(ests, refs).loss; }, {ests});
  EXPECT_TRUE(rep.passed) << rep.Summary();
}

TEST_F(TrainingTest, A2tExamples) {
  Model model(Tiny("ifasnet"), 2);
  for (const auto &[name, t] : model.params().entries()) {
    Tensor z = t;
    std::fill(z.mutable_data().begin(), z.mutable_data().end(), 0.0);
  }
  // All-zero parameters produce silence: the SNR term is 0 dB.
  const Tensor single = RandomTensor({2, 33}, 12);
  const Tensor target = Select(single, 0, 0);
  EXPECT_NEAR(A2tLoss(model, single, target).item(), 0.0, 1e-8);
}

TEST_F(TrainingTest, CompositeLossIsMixturePlusWeightedA2t) {
  Model model(Tiny("ifasnet"), 3);
  const Example ex = RandomExample(3, 29, 13);
  const Tensor refs = ReferenceTargets(ex, 0);
  const double mix = PitLoss(model.Forward(ex.mixture), refs).loss.item();
  const double a0 = A2tLoss(model, Select(ex.targets, 0, 0), Select(refs, 0, 0)).item();
  const double a1 = A2tLoss(model, Select(ex.targets, 0, 1), Select(refs, 0, 1)).item();
  StepLoss parts;
  const double total = TrainingLoss(model, ex, 0.7, &parts).item();
  EXPECT_NEAR(total, mix + 0.7 * 0.5 * (a0 + a1), 1e-12);
  EXPECT_NEAR(parts.separation, mix, 1e-12);
  EXPECT_NEAR(parts.a2t, 0.5 * (a0 + a1), 1e-12);
  EXPECT_NEAR(TrainingLoss(model, ex, 0.0).item(), mix, 1e-12);
}

TEST_F(TrainingTest, LearningRateSchedule) {
  TrainConfig cfg;
  EXPECT_DOUBLE_EQ(LearningRate(cfg, 1), 1e-3);
  EXPECT_DOUBLE_EQ(LearningRate(cfg, 4), 1e-3 * 0.98 * 0.98);
  EXPECT_DOUBLE_EQ(LearningRate(cfg, 5), 1e-3 * 0.98 * 0.98);
  EXPECT_THROW(LearningRate(cfg, 0), ConfigError);
}

TEST_F(TrainingTest, ClippingBoundsNormAndKeepsDirection) {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Tensor a = RandomTensor({5, 4}, seed), b = RandomTensor({7}, seed + 1);
    a.set_requires_grad(true);
    b.set_requires_grad(true);
    const double scale = std::pow(10.0, static_cast<double>(seed) - 3);
    std::vector<double> before;
    for (Tensor *t : {&a, &b}) {
      auto g = t->mutable_grad();
      const auto r = RandomVector(g.size(), seed + 7);
      for (size_t i = 0; i < g.size(); ++i) g[i] = scale * r[i];
      before.insert(before.end(), g.begin(), g.end());
    }
    const double norm = ClipGradNorm({a, b}, 5.0);
    const double after = GradNorm({a, b});
    EXPECT_LE(after, 5.0 + 1e-9);
    std::vector<double> now(a.grad());
    const auto bg = b.grad();
    now.insert(now.end(), bg.begin(), bg.end());
    const double k = norm > 5.0 ? 5.0 / norm : 1.0;
    for (size_t i = 0; i < now.size(); ++i) EXPECT_NEAR(now[i], k * before[i], 1e-12);
  }
}

TEST_F(TrainingTest, AdamZeroGradLeavesParams) {
  Tensor p = RandomTensor({6}, 1);
  p.set_requires_grad(true);
  const std::vector<double> start(p.values());
  p.mutable_grad();
  Adam opt({p});
  EXPECT_TRUE(opt.Step(1e-2));
  EXPECT_EQ(p.values(), start);
}

TEST_F(TrainingTest, AdamMatchesHandRecurrence) {
  // f(x) = x^2 from x = 1; gradient 2x.
  Tensor x = Tensor({1}, {1.0});
  x.set_requires_grad(true);
  Adam opt({x});
  double xr = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 3; ++t) {
    x.ZeroGrad();
    x.mutable_grad()[0] = 2.0 * x.values()[0];
    ASSERT_TRUE(opt.Step(0.1));
    const double g = 2.0 * xr;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    xr -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    EXPECT_NEAR(x.values()[0], xr, 1e-15) << t;
    if (t == 1) EXPECT_LT(x.values()[0], 1.0);
  }
}

TEST_F(TrainingTest, AdamRejectsNonFiniteGradient) {
  Tensor p = RandomTensor({3}, 2);
  p.set_requires_grad(true);
  const std::vector<double> start(p.values());
  p.mutable_grad()[1] = NAN;
  Adam opt({p});
  EXPECT_FALSE(opt.Step(1e-3));
  EXPECT_EQ(opt.steps(), 0);
  EXPECT_EQ(p.values(), start);
}

TEST_F(TrainingTest, EarlyStopOnConstantLoss) {
  TrainConfig cfg;
  cfg.epochs = 100;
  int best_calls = 0;
  TrainResult r = RunEpochs(
      cfg, [](int, double) { return std::make_pair(1.0, 1.0); },
      [&](int) { ++best_calls; });
  EXPECT_TRUE(r.early_stopped);
  EXPECT_EQ(r.log.back().epoch, 11);
  EXPECT_EQ(r.best_epoch, 1);
  EXPECT_EQ(best_calls, 1);
  EXPECT_THROW(RunEpochs(cfg, [](int, double) { return std::make_pair(NAN, 1.0); }),
               NumericError);
}

TEST_F(TrainingTest, TrainingIsDeterministicAndLowersLoss) {
  auto run = [] {
    CurrentTape().Reset();
    Model model(Tiny("ifasnet"), 4);
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.lr = 5e-3;
    cfg.seed = 9;
    cfg.a2t_weight = 0.5;
    cfg.batch_size = 2;
    std::vector<Example> data = {RandomExample(2, 40, 1), RandomExample(3, 40, 2),
                                 RandomExample(4, 40, 3)};
    return Train(model, data, {}, cfg);
  };
  const TrainResult a = run();
  const TrainResult b = run();
  ASSERT_EQ(a.log.size(), b.log.size());
  for (size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(a.log[i].train_loss, b.log[i].train_loss);
    EXPECT_EQ(a.log[i].val_loss, b.log[i].val_loss);
  }
  EXPECT_LT(a.log.back().val_loss, a.log.front().val_loss);
}

TEST_F(TrainingTest, CheckpointRoundTripAndLog) {
  const fs::path dir = fs::temp_directory_path() / ("ifasnet_train_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  Model model(Tiny("fasnet-miso-fncc"), 5);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.a2t_weight = 0.0;
  Train(model, {RandomExample(2, 30, 4)}, {}, cfg,
        {(dir / "best.ckpt").string(), (dir / "log.jsonl").string()});
  const Model back = LoadModel((dir / "best.ckpt").string());
  EXPECT_EQ(EncodeConfig(back.config()), EncodeConfig(model.config()));
  EXPECT_EQ(PresetFor(back.config()), "fasnet-miso-fncc");
  std::ifstream log(dir / "log.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    ++lines;
    EXPECT_NE(line.find("\"train_loss\""), std::string::npos);
    EXPECT_NE(line.find("\"lr\""), std::string::npos);
  }
  EXPECT_EQ(lines, 2);
  fs::remove_all(dir);
}

TEST_F(TrainingTest, IdentityBaselineScoresZeroAndModelLoads) {
  const fs::path dir = fs::temp_directory_path() / ("ifasnet_eval_" + std::to_string(::getpid()));
  WriteSyntheticCorpus((dir / "corpus").string(), 3, 1, 1.0, 4);
  DatasetOptions opts;
  opts.n_utts = 5;
  opts.seed = 2;
  opts.out_dir = (dir / "data").string();
  opts.speech_files = ListWavFiles((dir / "corpus" / "speech").string());
  opts.noise_files = ListWavFiles((dir / "corpus" / "noise").string());
  opts.duration = 0.25;
  const auto entries = BuildDataset(opts);
  const EvalReport r = Evaluate(IdentitySeparator(), entries, opts.out_dir);
  ASSERT_EQ(r.utterances.size(), 5u);
  EXPECT_EQ(r.mics.size(), 5u);
  for (const UtteranceScore &u : r.utterances) {
    for (double v : u.si_sdri) EXPECT_NEAR(v, 0.0, 1e-9);
  }
  const auto examples = LoadExamples((fs::path(opts.out_dir) / "manifest.jsonl").string());
  ASSERT_EQ(examples.size(), 5u);
  EXPECT_EQ(examples[3].mixture.dim(0), entries[3].n_mics);
  EXPECT_EQ(examples[3].targets.dim(1), entries[3].n_mics);
  fs::remove_all(dir);
}

TEST_F(TrainingTest, ReportRecombinesAndRoundTrips) {
  EvalReport r;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 23; ++i) {
    UtteranceScore s;
    s.id = "u" + std::to_string(i);
    s.n_mics = 2 + i % 5;
    s.overlap_ratio = u(rng);
    s.bucket = OverlapBucket(s.overlap_ratio);
    s.perm = {i % 2, 1 - i % 2};
    s.si_sdr = {u(rng) * 20, u(rng) * 20};
    s.si_sdri = {u(rng) * 10, u(rng) * 10};
    s.mean_si_sdri = 0.5 * (s.si_sdri[0] + s.si_sdri[1]);
    r.Add(s);
  }
  double weighted = 0.0;
  int count = 0;
  for (const CellStats &b : r.buckets) {
    if (b.count) weighted += *b.mean() * b.count;
    count += b.count;
  }
  EXPECT_EQ(count, 23);
  EXPECT_NEAR(weighted / count, *r.overall.mean(), 1e-12);
  const std::string text = r.ToJson();
  EXPECT_EQ(EvalReport::FromJson(text).ToJson(), text);
  EXPECT_THROW(EvalReport::FromJson("{}"), FormatError);
}

}  // namespace
}  // namespace ifasnet
