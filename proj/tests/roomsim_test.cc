// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ifasnet/roomsim.h"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>

#include <unistd.h>

#include "ifasnet/wav.h"
#include "test_util.h"

namespace ifasnet {
namespace {

namespace fs = std::filesystem;
constexpr double kPi = std::numbers::pi;

double Distance(const Vec3 &a, const Vec3 &b) {
  return std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
}

std::string ReadBytes(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

class TempDir {
 public:
  explicit TempDir(const std::string &tag) {
    path_ = fs::temp_directory_path() / ("ifasnet_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string str() const { return path_.string(); }
  fs::path operator/(const std::string &s) const { return path_ / s; }

 private:
  fs::path path_;
};

std::vector<double> Speech(uint64_t seed, double seconds) {
  std::mt19937_64 rng(seed);
  return SynthesizeSpeech(rng, static_cast<int64_t>(seconds * 16000), 16000);
}

std::vector<double> Noise(uint64_t seed, double seconds) {
  std::mt19937_64 rng(seed);
  return SynthesizeNoise(rng, static_cast<int64_t>(seconds * 16000), 16000);
}

MixtureSpec ShortSpec(uint64_t seed, int mics) {
  MixtureSpec spec = SampleMixtureSpec(seed, mics, 0.25);
  spec.room.t60 = 0.15;
  return spec;
}

TEST(WavTest, FloatRoundTrip) {
  TempDir dir("wav");
  Tensor x = test::RandomTensor({3, 101}, 1);
  WriteWav((dir / "a.wav").string(), {16000, x});
  Audio back = ReadWav((dir / "a.wav").string());
  EXPECT_EQ(back.sample_rate, 16000);
  ASSERT_EQ(back.samples.shape(), (Shape{3, 101}));
  for (int64_t i = 0; i < x.numel(); ++i) {
    EXPECT_EQ(back.samples.data()[i], static_cast<double>(static_cast<float>(x.data()[i])));
  }
}

TEST(WavTest, ReadsPcm16) {
  TempDir dir("pcm");
  std::string b = "RIFF";
  auto u32 = [&](uint32_t v) { for (int i = 0; i < 4; ++i) b.push_back(char(v >> (8 * i))); };
  auto u16 = [&](uint16_t v) { b.push_back(char(v)); b.push_back(char(v >> 8)); };
  u32(36 + 8);
  b += "WAVEfmt ";
  u32(16); u16(1); u16(2); u32(8000); u32(8000 * 4); u16(4); u16(16);
  b += "data";
  u32(8);
  u16(16384); u16(0x8000); u16(0); u16(0xC000);
  std::ofstream((dir / "p.wav").string(), std::ios::binary) << b;
  Audio a = ReadWav((dir / "p.wav").string());
  EXPECT_EQ(a.sample_rate, 8000);
  EXPECT_EQ(a.samples.values(), (std::vector<double>{0.5, 0.0, -1.0, -0.5}));
}

TEST(WavTest, Errors) {
  TempDir dir("wavbad");
  EXPECT_THROW(ReadWav((dir / "missing.wav").string()), IoError);
  std::ofstream((dir / "junk.wav").string()) << "not audio at all";
  EXPECT_THROW(ReadWav((dir / "junk.wav").string()), FormatError);
  EXPECT_THROW(WriteWav((dir / "no/such/dir.wav").string(), {16000, Tensor::Zeros({1, 4})}),
               IoError);
}

TEST(RoomTest, SabineAndEyringAbsorption) {
  RoomSpec room;
  room.dims = {6, 4, 3};
  room.t60 = 0.3;
  const double sabine = 0.161 * 72.0 / (108.0 * 0.3);
  EXPECT_NEAR(SabineAbsorption(room), sabine, 1e-15);
  room.calibrate_decay = false;
  EXPECT_NEAR(WallAbsorption(room), sabine, 1e-15);
  room.dims = {10, 10, 4};
  room.t60 = 0.1;
  const double x = 0.161 * 400.0 / (2 * (100 + 40 + 40) * 0.1);
  ASSERT_GE(x, 1.0);
  EXPECT_NEAR(SabineAbsorption(room), 1.0 - std::exp(-x), 1e-15);
  room.absorption = 1.5;
  EXPECT_THROW(WallAbsorption(room), ConfigError);
  room.absorption = 0.0;
  EXPECT_THROW(WallAbsorption(room), ConfigError);
}

TEST(RoomTest, GeometryViolationsRejected) {
  RoomSpec room;
  EXPECT_THROW(SimulateRir(room, {7, 1, 1}, {1, 1, 1}), ConfigError);
  EXPECT_THROW(SimulateRir(room, {1, 1, 1}, {1, 1, 0}), ConfigError);
  EXPECT_THROW(SimulateRir(room, {1, 1, 1}, {1, 1, 1}), ConfigError);
}

TEST(RoomTest, AnechoicHasSingleArrival) {
  RoomSpec room;
  room.absorption = 1.0;
  const Vec3 src = {1.2, 1.3, 1.4}, mic = {3.7, 2.2, 1.1};
  const auto h = SimulateRir(room, src, mic);
  const double d = Distance(src, mic);
  const int64_t peak = std::llround(d / room.sound_speed * room.fs);
  int64_t argmax = 0;
  for (size_t i = 0; i < h.size(); ++i) {
    if (std::abs(h[i]) > std::abs(h[argmax])) argmax = static_cast<int64_t>(i);
  }
  EXPECT_LE(std::abs(argmax - peak), 1);
  double total = 0.0, tail = 0.0;
  for (size_t i = 0; i < h.size(); ++i) {
    total += h[i] * h[i];
    if (std::abs(static_cast<int64_t>(i) - peak) > kSincTaps / 2) tail += h[i] * h[i];
  }
  EXPECT_LT(tail, 1e-6 * h[argmax] * h[argmax]);
  EXPECT_GT(total, 0.0);
}

TEST(RoomTest, InverseDistanceLaw) {
  RoomSpec room;
  room.dims = {9, 5, 3};
  room.absorption = 1.0;
  // Distances on whole-sample delays so the peak tap carries the full amplitude.
  const double unit = room.sound_speed / room.fs;
  const Vec3 src = {1.0, 2.5, 1.5};
  const Vec3 near = {1.0 + 150 * unit, 2.5, 1.5};
  const Vec3 far = {1.0 + 300 * unit, 2.5, 1.5};
  auto peak = [](const std::vector<double> &h) {
    double m = 0.0;
    for (double v : h) m = std::max(m, std::abs(v));
    return m;
  };
  const double a = peak(SimulateRir(room, src, near));
  const double b = peak(SimulateRir(room, src, far));
  EXPECT_NEAR(a / b, 2.0, 0.04);
  EXPECT_NEAR(a, 1.0 / (4 * kPi * 150 * unit), 1e-12);
}

TEST(RoomTest, DecayTimeTracksRequestedT60) {
  RoomSpec room;
  room.dims = {6, 4, 3};
  for (double t60 : {0.1, 0.3, 0.5}) {
    room.t60 = t60;
    const auto h = SimulateRir(room, {1.5, 1.2, 1.6}, {4.1, 2.9, 1.2});
    const double est = EstimateT60(h, room.fs);
    EXPECT_NEAR(est / t60, 1.0, 0.3) << "t60=" << t60 << " est=" << est;
    EXPECT_LT(TailLevelDb(h, room.fs), -60.0) << "t60=" << t60;
  }
}

TEST(RoomTest, EstimateT60OnExponentialDecay) {
  // h[n] = exp(-a n) has energy decay 20 a log10(e) dB per sample.
  const double fs = 16000, t60 = 0.4;
  const double a = 3.0 * std::log(10.0) / (t60 * fs);
  std::vector<double> h(static_cast<size_t>(2 * t60 * fs));
  for (size_t i = 0; i < h.size(); ++i) h[i] = std::exp(-a * i);
  EXPECT_NEAR(EstimateT60(h, fs), t60, 1e-3);
}

TEST(RoomTest, DirectPathDelayOverRandomGeometries) {
  for (uint64_t seed = 0; seed < 100; ++seed) {
    MixtureSpec spec = SampleMixtureSpec(seed, 1);
    spec.room.calibrate_decay = false;
    const Vec3 &src = spec.source_positions[seed % 3];
    const Vec3 &mic = spec.mic_positions[0];
    const double d = Distance(src, mic);
    const auto h = SimulateRir(spec.room, src, mic);
    EXPECT_EQ(FindDirectPeak(h, d), std::llround(d / 343.0 * 16000.0)) << "seed " << seed;
  }
}

TEST(RoomTest, PlacementRules) {
  for (uint64_t seed = 0; seed < 50; ++seed) {
    const MixtureSpec s = SampleMixtureSpec(seed, 2 + seed % 5);
    ASSERT_EQ(static_cast<int>(s.mic_positions.size()), s.n_mics);
    EXPECT_GE(s.room.dims[0], 3.0);
    EXPECT_LE(s.room.dims[0], 10.0);
    EXPECT_GE(s.room.dims[2], 2.5);
    EXPECT_LE(s.room.dims[2], 4.0);
    EXPECT_GE(s.room.t60, 0.1);
    EXPECT_LE(s.room.t60, 0.5);
    EXPECT_GE(s.noise_snr_db, 10.0);
    EXPECT_LE(s.noise_snr_db, 20.0);
    EXPECT_GE(s.rel_snr_db, 0.0);
    EXPECT_LE(s.rel_snr_db, 5.0);
    auto clear = [&](const Vec3 &p) {
      for (int a = 0; a < 3; ++a) {
        if (p[a] < kWallClearance || p[a] > s.room.dims[a] - kWallClearance) return false;
      }
      return true;
    };
    for (int i = 0; i < 3; ++i) {
      EXPECT_TRUE(clear(s.source_positions[i]));
      for (int j = 0; j < i; ++j) {
        EXPECT_GE(Distance(s.source_positions[i], s.source_positions[j]), kSourceSpacing);
      }
    }
    for (const Vec3 &m : s.mic_positions) {
      EXPECT_TRUE(clear(m));
      for (const Vec3 &src : s.source_positions) EXPECT_GE(Distance(m, src), kMicSourceSpacing);
    }
  }
}

TEST(ConvolveTest, MatchesDirectSum) {
  const auto a = test::RandomVector(300, 1), b = test::RandomVector(57, 2);
  const auto y = FftConvolve(a, b, 400);
  ASSERT_EQ(y.size(), 400u);
  for (size_t n = 0; n < y.size(); ++n) {
    double acc = 0.0;
    for (size_t k = 0; k < b.size(); ++k) {
      if (n >= k && n - k < a.size()) acc += a[n - k] * b[k];
    }
    EXPECT_NEAR(y[n], acc, 1e-12) << n;
  }
}

TEST(MixtureTest, LayoutRealizesOverlapRatio) {
  for (double r : {0.0, 0.1, 0.37, 0.5, 0.8, 1.0}) {
    const OverlapLayout lay = ComputeLayout(64000, r);
    EXPECT_NEAR(lay.Ratio(), r, 1.0 / 64000) << r;
    EXPECT_EQ(lay.canvas - lay.onset_b, lay.span);
  }
  EXPECT_EQ(ComputeLayout(64000, 1.0).onset_b, 0);
  EXPECT_EQ(ComputeLayout(64000, 0.0).Overlap(), 0);
  EXPECT_THROW(ComputeLayout(64000, 1.5), ConfigError);
}

TEST(MixtureTest, BucketBoundaries) {
  EXPECT_EQ(OverlapBucket(0.0), 0);
  EXPECT_EQ(OverlapBucket(0.2499999), 0);
  EXPECT_EQ(OverlapBucket(0.25), 1);
  EXPECT_EQ(OverlapBucket(0.5), 2);
  EXPECT_EQ(OverlapBucket(0.75), 3);
  EXPECT_EQ(OverlapBucket(1.0), 3);
  EXPECT_STREQ(OverlapBucketName(0), "<25%");
  EXPECT_STREQ(OverlapBucketName(3), ">75%");
}

TEST(MixtureTest, AdditivitySnrAndShapes) {
  for (uint64_t seed = 0; seed < 4; ++seed) {
    const MixtureSpec spec = ShortSpec(seed, 2 + static_cast<int>(seed));
    const Mixture m = GenerateMixture(spec, Speech(seed, 0.5), Speech(seed + 10, 0.5),
                                      Noise(seed, 0.5));
    const int64_t n = spec.CanvasSamples(), mics = spec.n_mics;
    ASSERT_EQ(m.mixture.shape(), (Shape{mics, n}));
    ASSERT_EQ(m.targets.shape(), (Shape{2, mics, n}));
    double residual = 0.0;
    for (int64_t c = 0; c < mics; ++c) {
      for (int64_t i = 0; i < n; ++i) {
        const double sum = m.targets.at({0, c, i}) + m.targets.at({1, c, i}) +
                           m.noise_image.at({c, i});
        residual = std::max(residual, std::abs(m.mixture.at({c, i}) - sum));
      }
    }
    EXPECT_LT(residual, 1e-9);
    const RealizedSnr snr = MeasureSnr(m);
    EXPECT_NEAR(snr.rel_db, spec.rel_snr_db, 0.1);
    EXPECT_NEAR(snr.noise_db, spec.noise_snr_db, 0.1);
    double peak = 0.0;
    for (double v : m.mixture.data()) peak = std::max(peak, std::abs(v));
    EXPECT_LE(peak, 0.9 + 1e-12);
  }
}

TEST(MixtureTest, FullOverlapHasNoShift) {
  MixtureSpec spec = ShortSpec(3, 2);
  spec.overlap_ratio = 1.0;
  const Mixture m = GenerateMixture(spec, Speech(1, 0.5), Speech(2, 0.5), Noise(3, 0.5));
  EXPECT_EQ(m.layout.onset_b, 0);
  EXPECT_EQ(m.layout.span, spec.CanvasSamples());
}

TEST(MixtureTest, DeterministicUnderSeed) {
  const MixtureSpec spec = ShortSpec(5, 3);
  const auto a = Speech(1, 0.6), b = Speech(2, 0.6), v = Noise(3, 0.6);
  const Mixture x = GenerateMixture(spec, a, b, v);
  const Mixture y = GenerateMixture(ShortSpec(5, 3), a, b, v);
  EXPECT_EQ(x.mixture.values(), y.mixture.values());
  EXPECT_EQ(x.targets.values(), y.targets.values());
  const Mixture z = GenerateMixture(ShortSpec(6, 3), a, b, v);
  EXPECT_NE(x.mixture.values(), z.mixture.values());
}

TEST(MixtureTest, RejectsSilentAndShortSources) {
  const MixtureSpec spec = ShortSpec(1, 2);
  const auto a = Speech(1, 0.5), b = Speech(2, 0.5), v = Noise(3, 0.5);
  EXPECT_THROW(GenerateMixture(spec, a, b, std::vector<double>(8000, 0.0)), NumericError);
  EXPECT_THROW(GenerateMixture(spec, std::vector<double>(8000, 0.0), b, v), NumericError);
  EXPECT_THROW(GenerateMixture(spec, a, b, Noise(3, 0.1)), ConfigError);
  EXPECT_THROW(GenerateMixture(spec, std::vector<double>(10, 0.1), b, v), ConfigError);
}

TEST(ManifestTest, LineRoundTrips) {
  ManifestEntry e;
  e.id = "utt00003";
  e.mixture_path = "mix/utt00003.wav";
  e.target_paths = {"s1/utt00003.wav", "s2/utt00003.wav"};
  e.n_mics = 4;
  e.overlap_ratio = 0.61;
  e.t60 = 0.27;
  e.rel_snr_db = 1.5;
  e.noise_snr_db = 13.25;
  e.room_dims = {4.5, 7.25, 2.75};
  e.seed = 0xfedcba9876543210ULL;
  e.overlap_bucket = 2;
  const ManifestEntry back = ParseManifestLine(ManifestLine(e));
  EXPECT_EQ(ManifestLine(back), ManifestLine(e));
  EXPECT_EQ(back.seed, e.seed);
  EXPECT_THROW(ParseManifestLine("{\"id\": 3}"), FormatError);
  EXPECT_THROW(ParseManifestLine("not json"), FormatError);
}

class DatasetTest : public ::testing::Test {
 protected:
  DatasetOptions Options(const TempDir &corpus, const std::string &out) {
    DatasetOptions o;
    o.n_utts = 10;
    o.seed = 7;
    o.out_dir = out;
    o.duration = 0.25;
    o.speech_files = ListWavFiles((corpus / "speech").string());
    o.noise_files = ListWavFiles((corpus / "noise").string());
    return o;
  }
};

TEST_F(DatasetTest, DeterministicWithUniformMicHistogram) {
  TempDir corpus("corpus");
  WriteSyntheticCorpus(corpus.str(), 4, 2, 0.5, 3);
  TempDir out("data");
  const auto a = BuildDataset(Options(corpus, (out / "a").string()));
  const auto b = BuildDataset(Options(corpus, (out / "b").string()));
  ASSERT_EQ(a.size(), 10u);
  EXPECT_EQ(ReadBytes((out / "a/manifest.jsonl").string()),
            ReadBytes((out / "b/manifest.jsonl").string()));
  int hist[7] = {};
  for (const ManifestEntry &e : a) {
    ++hist[e.n_mics];
    EXPECT_EQ(e.overlap_bucket, OverlapBucket(e.overlap_ratio));
    for (const std::string &rel :
         {e.mixture_path, e.target_paths[0], e.target_paths[1]}) {
      EXPECT_EQ(ReadBytes((out / "a" / rel).string()), ReadBytes((out / "b" / rel).string()));
    }
    const Audio mix = ReadWav((out / "a" / e.mixture_path).string());
    EXPECT_EQ(mix.channels(), e.n_mics);
    EXPECT_EQ(mix.frames(), 4000);
  }
  for (int m = 2; m <= 6; ++m) EXPECT_EQ(hist[m], 2) << m;
  const auto parsed = ReadManifest((out / "a/manifest.jsonl").string());
  ASSERT_EQ(parsed.size(), a.size());
  EXPECT_EQ(ManifestLine(parsed[4]), ManifestLine(a[4]));
}

TEST_F(DatasetTest, CorpusErrors) {
  TempDir corpus("short");
  WriteSyntheticCorpus(corpus.str(), 3, 1, 0.05, 3);
  TempDir out("data2");
  EXPECT_THROW(BuildDataset(Options(corpus, out.str())), ConfigError);
  DatasetOptions o = Options(corpus, out.str());
  o.speech_files.resize(1);
  EXPECT_THROW(BuildDataset(o), ConfigError);
  o = Options(corpus, out.str());
  o.noise_files = {(corpus / "missing.wav").string()};
  EXPECT_THROW(BuildDataset(o), IoError);
}

}  // namespace
}  // namespace ifasnet
