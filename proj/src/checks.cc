// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ifasnet/checks.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <random>

#include "ifasnet/error.h"
#include "ifasnet/features.h"
#include "ifasnet/framing.h"
#include "ifasnet/gradcheck.h"
#include "ifasnet/ops.h"
#include "ifasnet/roomsim.h"
#include "ifasnet/training.h"

namespace ifasnet {
namespace {

Tensor Uniform(const Shape &shape, uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(NumElements(shape));
  for (double &x : v) x = dist(rng);
  return Tensor(shape, std::move(v));
}

// sum(w * y) with fixed random weights so every output coordinate counts.
Tensor Probe(const Tensor &y, uint64_t seed) {
  return Sum(Mul(y, Uniform(y.shape(), seed ^ 0x9e3779b97f4a7c15ULL)));
}

struct PrimitiveCase {
  const char *name;
  std::vector<Shape> shapes;
  std::function<Tensor(const std::vector<Tensor> &)> fn;
  double lo = -1.0, hi = 1.0;
};

std::vector<PrimitiveCase> PrimitiveCases() {
  using V = std::vector<Tensor>;
  return {
      {"add", {{3, 4}, {4}}, [](const V &x) { return Add(x[0], x[1]); }},
      {"sub", {{3, 4}, {3, 1}}, [](const V &x) { return Sub(x[0], x[1]); }},
      {"mul", {{2, 3, 4}, {3, 4}}, [](const V &x) { return Mul(x[0], x[1]); }},
      {"div", {{3, 4}, {3, 4}}, [](const V &x) { return Div(x[0], x[1]); }, 0.5, 2.0},
      {"scale", {{5}}, [](const V &x) { return Scale(x[0], -1.7); }},
      {"add_scalar", {{5}}, [](const V &x) { return AddScalar(x[0], 0.3); }},
      {"tanh", {{6}}, [](const V &x) { return Tanh(x[0]); }, -2.0, 2.0},
      {"sigmoid", {{6}}, [](const V &x) { return Sigmoid(x[0]); }, -3.0, 3.0},
      {"square", {{6}}, [](const V &x) { return Square(x[0]); }},
      {"sqrt", {{6}}, [](const V &x) { return Sqrt(x[0]); }, 0.5, 2.0},
      {"log", {{6}}, [](const V &x) { return Log(x[0]); }, 0.5, 2.0},
      {"clamp_min", {{6}}, [](const V &x) { return ClampMin(x[0], -0.25); }},
      {"extract_frames", {{2, 11}},
       [](const V &x) { return ExtractFrames(x[0], 4, 3, -2, 5); }},
      {"matmul", {{2, 3, 5}, {5, 4}}, [](const V &x) { return MatMul(x[0], x[1]); }},
      {"batch_matmul_nt", {{2, 5, 8}, {2, 5, 8}},
       [](const V &x) { return BatchMatMulNT(x[0], x[1]); }},
      {"correlate_valid", {{3, 20}, {3, 7}},
       [](const V &x) { return CorrelateValid(x[0], x[1]); }},
      {"sum", {{3, 4}}, [](const V &x) { return Scale(Sum(x[0]), 0.7); }},
      {"sum_axis", {{3, 4, 2}}, [](const V &x) { return SumAxis(x[0], 1); }},
      {"mean_axis", {{3, 4, 2}}, [](const V &x) { return MeanAxis(x[0], 0); }},
      {"l2_norm_axis", {{3, 4}}, [](const V &x) { return L2NormAxis(x[0], 1); }},
      {"reshape", {{3, 4}}, [](const V &x) { return Reshape(x[0], {2, -1}); }},
      {"permute", {{2, 3, 4}}, [](const V &x) { return Permute(x[0], {2, 0, 1}); }},
      {"slice", {{4, 6}}, [](const V &x) { return Slice(x[0], 1, 2, 3); }},
      {"concat", {{2, 3}, {2, 2}}, [](const V &x) { return Concat({x[0], x[1]}, 1); }},
      {"stack", {{2, 3}, {2, 3}}, [](const V &x) { return Stack({x[0], x[1]}, 1); }},
      {"pad", {{3, 4}}, [](const V &x) { return Pad(x[0], 0, 2, 1); }},
      {"repeat", {{3, 4}}, [](const V &x) { return Repeat(x[0], 1, 3); }},
      {"overlap_add", {{2, 5, 8}}, [](const V &x) { return OverlapAddSum(x[0], 4); }},
  };
}

std::string Printf(const char *fmt, ...) {
  char buf[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  return buf;
}

double Distance(const Vec3 &a, const Vec3 &b) {
  return std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
}

}  // namespace

CheckResult RunCheck(const InvariantCheck &check) {
  CheckResult r;
  r.name = check.name;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    r.passed = check.run(&r.detail);
  } catch (const std::exception &e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CurrentTape().Reset();
  return r;
}

ModelConfig TinyConfig(const std::string &preset) {
  ModelConfig cfg = Preset(preset);
  cfg.framing = {.frame_len = 8, .hop = 4, .sample_context = 8, .feature_context = 2};
  cfg.feature_dim = 4;
  cfg.hidden = 3;
  cfg.n_blocks = 1;
  cfg.chunk_len = 4;
  cfg.codec_hidden = 3;
  return cfg;
}

bool CheckPrimitiveGradients(int seeds, std::string *detail) {
  double worst = 0.0;
  std::string worst_name;
  int failures = 0, runs = 0;
  for (const PrimitiveCase &c : PrimitiveCases()) {
    for (int seed = 0; seed < seeds; ++seed) {
      std::vector<Tensor> inputs;
      for (size_t i = 0; i < c.shapes.size(); ++i) {
        inputs.push_back(Uniform(c.shapes[i], seed * 31 + i, c.lo, c.hi));
      }
      const GradCheckReport r =
          CheckGradients([&] { return Probe(c.fn(inputs), seed); }, inputs);
      ++runs;
      if (!r.passed) ++failures;
      if (r.max_relative_error >= worst) {
        worst = r.max_relative_error;
        worst_name = c.name;
      }
    }
  }
  *detail = Printf("%zu ops x %d seeds, %d failed, max rel err %.2e (%s)",
                    PrimitiveCases().size(), seeds, failures, worst, worst_name.c_str());
  return failures == 0 && runs > 0;
}

std::string LossPathGradients::Summary() const {
  return Printf(
      "%d seeds, %lld coordinates; central: %d seed(s) above 1e-4, max rel err %.2e; "
      "five-point re-check cleared %lld coordinate(s), leaving %d seed(s) above 1e-4, "
      "max rel err %.2e",
      seeds, static_cast<long long>(coordinates), strict_failures, max_strict_error,
      static_cast<long long>(confirmed_coordinates), confirmed_failures, max_confirmed_error);
}

LossPathGradients MeasureLossPathGradients(const std::string &preset, int seeds) {
  LossPathGradients out;
  out.seeds = seeds;
  for (int seed = 0; seed < seeds; ++seed) {
    CurrentTape().Reset();
    Model model(TinyConfig(preset), seed);
    const std::vector<Tensor> params = model.params().Tensors();
    uint64_t k = 0;
    for (const Tensor &t : params) {
      Tensor r = Uniform(t.shape(), seed * 7919 + k++);
      Tensor target = t;
      std::copy(r.data().begin(), r.data().end(), target.mutable_data().begin());
    }
    const int64_t mics = 2 + seed % 3, samples = 21;
    Example ex;
    ex.targets = Uniform({2, mics, samples}, 1000 + seed, -0.5, 0.5);
    ex.mixture = Add(Select(ex.targets, 0, 0), Select(ex.targets, 0, 1));
    const GradCheckReport r = CheckGradients([&] { return TrainingLoss(model, ex, 1.0); },
                                             params, {.confirm_step = 1e-3});
    const double tol = GradCheckOptions{}.tolerance;
    if (r.max_relative_error > tol) ++out.strict_failures;
    if (r.max_confirmed_error > tol) ++out.confirmed_failures;
    out.coordinates += r.coordinates;
    out.confirmed_coordinates += r.confirmed;
    out.max_strict_error = std::max(out.max_strict_error, r.max_relative_error);
    out.max_confirmed_error = std::max(out.max_confirmed_error, r.max_confirmed_error);
  }
  CurrentTape().Reset();
  return out;
}

bool CheckFramingRoundTrip(int signals, std::string *detail) {
  const FramingConfig cfg;
  std::mt19937_64 rng(2026);
  std::uniform_int_distribution<int64_t> len(1000, 80000);
  double worst = 0.0;
  for (int i = 0; i < signals; ++i) {
    const int64_t n = len(rng);
    const Tensor x = Uniform({1, n}, rng());
    auto [fs, cs] = SplitFrames(x, cfg);
    const Tensor y = OverlapAdd(Select(fs.frames, 0, 0), cfg.hop, n);
    if (y.numel() != n) {
      *detail = Printf("length %lld reconstructed as %lld", static_cast<long long>(n),
                       static_cast<long long>(y.numel()));
      return false;
    }
    for (int64_t j = 0; j < n; ++j) {
      worst = std::max(worst, std::abs(y.data()[j] - x.data()[j]));
    }
  }
  *detail = Printf("%d signals, max abs err %.2e (limit 1e-10)", signals, worst);
  return worst < 1e-10;
}

bool CheckNccProperties(std::string *detail) {
  const FramingConfig cfg;
  const int64_t w = cfg.sample_context;
  double bound_excess = 0.0, gram_err = 0.0, scale_err = 0.0;
  bool finite = true;
  for (uint64_t seed = 0; seed < 5; ++seed) {
    // Channel 1 silent, part of channel 0 silent, channel 2 very loud.
    Tensor x = Uniform({3, 2000}, seed);
    for (int64_t i = 0; i < 2000; ++i) {
      x.mutable_data()[2000 + i] = 0.0;
      x.mutable_data()[4000 + i] *= 1e4;
    }
    for (int64_t i = 500; i < 900; ++i) x.mutable_data()[i] = 0.0;
    auto [fs, cs] = SplitFrames(x, cfg);
    const Tensor stacked = StackFeatureContext(fs.frames, cfg.feature_context);
    for (const Tensor &q : {Tncc(Select(fs.frames, 0, 0), cs).values, Fncc(stacked).values}) {
      for (double v : q.data()) {
        finite = finite && std::isfinite(v);
        bound_excess = std::max(bound_excess, std::abs(v) - 1.0);
      }
    }
    // Reference Gram on random features: rows of length N.
    const int64_t m = 3, t = 9, n = 64, p = cfg.context_rows();
    const Tensor f = StackFeatureContext(Uniform({m, t, n}, 100 + seed), cfg.feature_context);
    const Tensor q = Fncc(f).values;
    for (int64_t tt = cfg.feature_context; tt < t - cfg.feature_context; ++tt) {
      for (int64_t a = 0; a < p; ++a) {
        gram_err = std::max(gram_err, std::abs(q.at({0, tt, a * p + a}) - 1.0));
        for (int64_t b = 0; b < p; ++b) {
          gram_err = std::max(gram_err, std::abs(q.at({0, tt, a * p + b}) - q.at({0, tt, b * p + a})));
        }
      }
    }
    Tensor scaled = f.Clone();
    const Tensor d = Uniform({m * t * p}, 200 + seed, 0.1, 10.0);
    for (int64_t r = 0; r < m * t * p; ++r)
      for (int64_t k = 0; k < n; ++k) scaled.mutable_data()[r * n + k] *= d.data()[r];
    const Tensor q2 = Fncc(scaled).values;
    for (int64_t i = 0; i < q.numel(); ++i) {
      scale_err = std::max(scale_err, std::abs(q.data()[i] - q2.data()[i]));
    }
  }
  // Channel 1 is channel 0 delayed by d; the tNCC peak sits at lag W + d.
  const int64_t n = 4000, frame = 15;
  const Tensor src = Uniform({n + 2 * w}, 7);
  int misses = 0;
  for (int64_t dly = -w; dly <= w; ++dly) {
    std::vector<double> y(2 * n);
    for (int64_t i = 0; i < n; ++i) {
      y[i] = src.data()[i + w];
      y[n + i] = src.data()[i + w - dly];
    }
    auto [fs, cs] = SplitFrames(Tensor({2, n}, y), cfg);
    const Tensor q = Tncc(Select(fs.frames, 0, 0), cs).values;
    int64_t best = 0;
    for (int64_t j = 1; j < cfg.tncc_dim(); ++j) {
      if (q.at({1, frame, j}) > q.at({1, frame, best})) best = j;
    }
    if (best - w != dly) ++misses;
  }
  *detail = Printf("bound excess %.1e, gram err %.1e, row-scale err %.1e, delay misses %d/%lld",
                   std::max(bound_excess, 0.0), gram_err, scale_err, misses,
                   static_cast<long long>(2 * w + 1));
  return finite && bound_excess <= 1e-9 && gram_err <= 1e-9 && scale_err <= 1e-9 &&
         misses == 0;
}

bool CheckRirDirectPath(int geometries, std::string *detail) {
  int hits = 0;
  for (int seed = 0; seed < geometries; ++seed) {
    MixtureSpec spec = SampleMixtureSpec(seed, 1);
    spec.room.calibrate_decay = false;
    const Vec3 &src = spec.source_positions[seed % 3];
    const Vec3 &mic = spec.mic_positions[0];
    const double d = Distance(src, mic);
    const auto h = SimulateRir(spec.room, src, mic);
    if (FindDirectPeak(h, d) == std::llround(d / spec.room.sound_speed * spec.room.fs)) ++hits;
  }
  *detail = Printf("%d/%d geometries exact to the sample", hits, geometries);
  return hits == geometries;
}

std::vector<InvariantCheck> SelfCheckSuite() {
  std::vector<InvariantCheck> suite = {
      {"gradients: primitives",
       [](std::string *d) { return CheckPrimitiveGradients(20, d); }},
  };
  for (const std::string &preset : PresetNames()) {
    suite.push_back({"gradients: loss path " + preset, [preset](std::string *d) {
                       const LossPathGradients g = MeasureLossPathGradients(preset, 3);
                       *d = g.Summary();
                       return g.confirmed_failures == 0;
                     }});
  }
  suite.push_back({"framing: round trip", [](std::string *d) { return CheckFramingRoundTrip(50, d); }});
  suite.push_back({"ncc: properties", [](std::string *d) { return CheckNccProperties(d); }});
  suite.push_back({"rir: direct path", [](std::string *d) { return CheckRirDirectPath(100, d); }});
  return suite;
}

}  // namespace ifasnet
