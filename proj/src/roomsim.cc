// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ifasnet/roomsim.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "ifasnet/error.h"
#include "ifasnet/wav.h"
#include "json.hpp"

namespace ifasnet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kSincHalf = kSincTaps / 2;

double Norm(const Vec3 &a, const Vec3 &b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// Image offsets along one axis: distance component to the mic and number of
// wall reflections.
struct AxisImage {
  double delta;
  int reflections;
};

std::vector<AxisImage> AxisImages(double len, double src, double mic, double reach) {
  std::vector<AxisImage> out;
  const int n_max = static_cast<int>(std::ceil(reach / (2.0 * len))) + 1;
  for (int n = -n_max; n <= n_max; ++n) {
    for (int u = 0; u <= 1; ++u) {
      const double pos = (1 - 2 * u) * src + 2.0 * n * len;
      const double delta = pos - mic;
      if (std::abs(delta) > reach) continue;
      out.push_back({delta, std::abs(n - u) + std::abs(n)});
    }
  }
  return out;
}

// Adds amp * hann(x) * sinc(x), x = n - delay, over 81 taps around delay.
void RenderArrival(std::vector<double> &h, double delay, double amp) {
  const int64_t center = std::llround(delay);
  const double delta = static_cast<double>(center) - delay;  // in [-0.5, 0.5]
  const int64_t len = static_cast<int64_t>(h.size());
  if (delta == 0.0) {
    if (center >= 0 && center < len) h[center] += amp;
    return;
  }
  // sin(pi (j + delta)) = (-1)^j sin(pi delta); the Hann phase is advanced by
  // a rotation instead of one cos call per tap.
  const double s = std::sin(kPi * delta);
  const double step = 2.0 * kPi / kSincTaps;
  const double cs = std::cos(step), sn = std::sin(step);
  double c = std::cos(step * (-kSincHalf + delta));
  double si = std::sin(step * (-kSincHalf + delta));
  for (int j = -kSincHalf; j <= kSincHalf; ++j) {
    const int64_t n = center + j;
    if (n >= 0 && n < len) {
      const double x = j + delta;
      const double sign = (j & 1) ? -1.0 : 1.0;
      h[n] += amp * 0.5 * (1.0 + c) * sign * s / (kPi * x);
    }
    const double nc = c * cs - si * sn;
    si = si * cs + c * sn;
    c = nc;
  }
}

int64_t FftSize(int64_t min_len) {
  int64_t best = 1;
  while (best < min_len) best <<= 1;
  // Smallest 2^a 3^b 5^c at or above min_len.
  for (int64_t p5 = 1; p5 < best; p5 *= 5) {
    for (int64_t p35 = p5; p35 < best; p35 *= 3) {
      int64_t n = p35;
      while (n < min_len) n <<= 1;
      best = std::min(best, n);
    }
  }
  return best;
}

// Real FFT convolution at a fixed transform size. Spectra are cached by the
// caller so each source is transformed once.
class FftConvolver {
 public:
  explicit FftConvolver(int64_t n) : n_(n), bins_(n / 2 + 1) {
    real_ = fftw_alloc_real(n_);
    spec_ = fftw_alloc_complex(bins_);
    forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(n_), real_, spec_, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(static_cast<int>(n_), spec_, real_, FFTW_ESTIMATE);
  }
  ~FftConvolver() {
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
    fftw_free(real_);
    fftw_free(spec_);
  }
  FftConvolver(const FftConvolver &) = delete;
  FftConvolver &operator=(const FftConvolver &) = delete;

  using Spectrum = std::vector<std::array<double, 2>>;

  Spectrum Transform(const std::vector<double> &x) {
    std::fill(real_, real_ + n_, 0.0);
    std::copy_n(x.begin(), std::min<int64_t>(n_, x.size()), real_);
    fftw_execute(forward_);
    Spectrum out(bins_);
    for (int64_t k = 0; k < bins_; ++k) out[k] = {spec_[k][0], spec_[k][1]};
    return out;
  }

  std::vector<double> Product(const Spectrum &a, const Spectrum &b, int64_t out_len) {
    for (int64_t k = 0; k < bins_; ++k) {
      spec_[k][0] = a[k][0] * b[k][0] - a[k][1] * b[k][1];
      spec_[k][1] = a[k][0] * b[k][1] + a[k][1] * b[k][0];
    }
    fftw_execute(inverse_);
    std::vector<double> out(out_len);
    const double scale = 1.0 / static_cast<double>(n_);
    for (int64_t i = 0; i < out_len; ++i) out[i] = real_[i] * scale;
    return out;
  }

 private:
  int64_t n_;
  int64_t bins_;
  double *real_;
  fftw_complex *spec_;
  fftw_plan forward_;
  fftw_plan inverse_;
};

double MeanPower(const std::vector<double> &x, int64_t begin, int64_t end) {
  if (end <= begin) return 0.0;
  long double acc = 0.0L;
  for (int64_t i = begin; i < end; ++i) acc += static_cast<long double>(x[i]) * x[i];
  return static_cast<double>(acc / (end - begin));
}

std::mt19937_64 StreamRng(uint64_t seed, uint32_t stream) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), stream};
  return std::mt19937_64(seq);
}

double Uniform(std::mt19937_64 &rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int64_t UniformInt(std::mt19937_64 &rng, int64_t lo, int64_t hi) {
  return std::uniform_int_distribution<int64_t>(lo, hi)(rng);
}

Vec3 UniformPoint(std::mt19937_64 &rng, const Vec3 &dims) {
  Vec3 p;
  for (int a = 0; a < 3; ++a) p[a] = Uniform(rng, kWallClearance, dims[a] - kWallClearance);
  return p;
}

// Region where the relative speaker level is measured: the overlap when both
// talkers carry energy there, otherwise each talker's own extent.
struct RelRegion {
  int64_t a_begin, a_end, b_begin, b_end;
};

RelRegion RelSnrRegion(const OverlapLayout &lay, const std::vector<double> &a,
                       const std::vector<double> &b) {
  if (lay.Overlap() > 0 && MeanPower(a, lay.OverlapBegin(), lay.OverlapEnd()) > 0 &&
      MeanPower(b, lay.OverlapBegin(), lay.OverlapEnd()) > 0) {
    return {lay.OverlapBegin(), lay.OverlapEnd(), lay.OverlapBegin(), lay.OverlapEnd()};
  }
  return {0, lay.span, lay.onset_b, lay.canvas};
}

std::vector<double> Row(const Tensor &t, int64_t row) {
  const int64_t n = t.dim(t.rank() - 1);
  auto d = t.data();
  return std::vector<double>(d.begin() + row * n, d.begin() + (row + 1) * n);
}

std::vector<double> MonoSamples(const Audio &a, const std::string &path, double fs) {
  if (a.sample_rate != static_cast<int64_t>(fs)) {
    throw FormatError(path + ": sample rate " + std::to_string(a.sample_rate) +
                      " != " + std::to_string(static_cast<int64_t>(fs)));
  }
  if (a.channels() != 1) throw FormatError(path + ": expected mono audio");
  return std::vector<double>(a.samples.values());
}

void EnsureDir(const fs::path &p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create " + p.string() + ": " + ec.message());
}

}  // namespace

double RoomSpec::SurfaceArea() const {
  return 2.0 * (dims[0] * dims[1] + dims[0] * dims[2] + dims[1] * dims[2]);
}

double RoomSpec::Diagonal() const {
  return std::sqrt(dims[0] * dims[0] + dims[1] * dims[1] + dims[2] * dims[2]);
}

bool RoomSpec::Inside(const Vec3 &p) const {
  for (int a = 0; a < 3; ++a) {
    if (!(p[a] > 0.0 && p[a] < dims[a])) return false;
  }
  return true;
}

double SabineAbsorption(const RoomSpec &room) {
  if (!(room.t60 > 0.0)) throw ConfigError("t60 must be positive");
  const double x = 0.161 * room.Volume() / (room.SurfaceArea() * room.t60);
  return x < 1.0 ? x : 1.0 - std::exp(-x);
}

double WallAbsorption(const RoomSpec &room) {
  double alpha;
  if (room.absorption.has_value()) {
    alpha = *room.absorption;
  } else {
    alpha = SabineAbsorption(room);
    if (room.calibrate_decay) {
      // Reference pairs at fixed fractions of the room; their squared
      // responses are pooled before the decay fit.
      constexpr int kRounds = 5;
      constexpr double kTolerance = 0.02;
      static constexpr double kPairs[4][2][3] = {
          {{0.31, 0.37, 0.43}, {0.67, 0.61, 0.53}},
          {{0.22, 0.71, 0.35}, {0.58, 0.27, 0.62}},
          {{0.75, 0.78, 0.66}, {0.41, 0.48, 0.31}},
          {{0.63, 0.21, 0.52}, {0.18, 0.45, 0.47}}};
      RoomSpec probe = room;
      for (int round = 0; round < kRounds && alpha < 1.0; ++round) {
        probe.absorption = alpha;
        std::vector<double> pooled;
        for (const auto &pair : kPairs) {
          Vec3 src, mic;
          for (int a = 0; a < 3; ++a) {
            src[a] = pair[0][a] * room.dims[a];
            mic[a] = pair[1][a] * room.dims[a];
          }
          const auto h = SimulateRir(probe, src, mic);
          pooled.resize(h.size(), 0.0);
          for (size_t i = 0; i < h.size(); ++i) pooled[i] += h[i] * h[i];
        }
        for (double &v : pooled) v = std::sqrt(v);
        const double ratio = EstimateT60(pooled, room.fs) / room.t60;
        if (std::abs(ratio - 1.0) < kTolerance) break;
        alpha = std::min(1.0, 1.0 - std::exp(std::log1p(-alpha) * ratio));
      }
    }
  }
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw ConfigError("wall absorption " + std::to_string(alpha) + " outside (0, 1]");
  }
  return alpha;
}

int64_t DefaultRirLength(const RoomSpec &room) {
  const double t60 = room.absorption.has_value() && *room.absorption >= 1.0 ? 0.0 : room.t60;
  return static_cast<int64_t>(
             std::ceil((t60 + room.Diagonal() / room.sound_speed) * room.fs)) +
         kSincTaps;
}

std::vector<double> SimulateRir(const RoomSpec &room, const Vec3 &src, const Vec3 &mic,
                                int64_t rir_len) {
  for (int a = 0; a < 3; ++a) {
    if (!(room.dims[a] > 0.0)) throw ConfigError("room dimensions must be positive");
  }
  if (!room.Inside(src)) throw ConfigError("source outside the room");
  if (!room.Inside(mic)) throw ConfigError("microphone outside the room");
  if (Norm(src, mic) <= 0.0) throw ConfigError("source and microphone coincide");
  if (!(room.fs > 0.0) || !(room.sound_speed > 0.0)) {
    throw ConfigError("sample rate and sound speed must be positive");
  }
  const double alpha = WallAbsorption(room);
  const double beta = std::sqrt(1.0 - alpha);
  if (rir_len <= 0) rir_len = DefaultRirLength(room);

  std::vector<double> h(rir_len, 0.0);
  const double per_meter = room.fs / room.sound_speed;
  // Arrivals whose sinc support starts past the end contribute nothing.
  const double reach = (rir_len + kSincHalf) / per_meter;
  const auto xs = AxisImages(room.dims[0], src[0], mic[0], reach);
  const auto ys = AxisImages(room.dims[1], src[1], mic[1], reach);
  const auto zs = AxisImages(room.dims[2], src[2], mic[2], reach);

  // beta^k, with 0^0 = 1 so the anechoic case keeps only the direct path.
  int max_refl = 0;
  for (const auto *axis : {&xs, &ys, &zs}) {
    for (const AxisImage &i : *axis) max_refl = std::max(max_refl, i.reflections);
  }
  std::vector<double> beta_pow(3 * max_refl + 1, 1.0);
  for (size_t k = 1; k < beta_pow.size(); ++k) beta_pow[k] = beta_pow[k - 1] * beta;

  const double reach2 = reach * reach;
  for (const AxisImage &x : xs) {
    const double dx2 = x.delta * x.delta;
    for (const AxisImage &y : ys) {
      const double dxy2 = dx2 + y.delta * y.delta;
      if (dxy2 > reach2) continue;
      for (const AxisImage &z : zs) {
        const double d2 = dxy2 + z.delta * z.delta;
        if (d2 > reach2) continue;
        const double gain = beta_pow[x.reflections + y.reflections + z.reflections];
        if (gain == 0.0) continue;
        const double d = std::sqrt(d2);
        RenderArrival(h, d * per_meter, gain / (4.0 * kPi * d));
      }
    }
  }
  for (double v : h) {
    if (!std::isfinite(v)) throw NumericError("non-finite RIR tap");
  }
  return h;
}

int64_t FindDirectPeak(const std::vector<double> &rir, double distance) {
  const double threshold = 0.5 / (4.0 * kPi * distance);
  const int64_t n = static_cast<int64_t>(rir.size());
  for (int64_t i = 0; i < n; ++i) {
    const double prev = i > 0 ? rir[i - 1] : -INFINITY;
    const double next = i + 1 < n ? rir[i + 1] : -INFINITY;
    if (rir[i] >= threshold && rir[i] >= prev && rir[i] >= next) return i;
  }
  return -1;
}

double TailLevelDb(const std::vector<double> &rir, double fs) {
  const int64_t n = static_cast<int64_t>(rir.size());
  const int64_t w = std::clamp<int64_t>(static_cast<int64_t>(0.01 * fs), 1, n);
  double peak = 0.0;
  for (double v : rir) peak = std::max(peak, v * v);
  if (peak <= 0.0) throw NumericError("tail level of an all-zero response");
  const double tail = MeanPower(rir, n - w, n);
  return tail > 0.0 ? 10.0 * std::log10(tail / peak) : -INFINITY;
}

double EstimateT60(const std::vector<double> &rir, double fs) {
  const int64_t n = static_cast<int64_t>(rir.size());
  std::vector<long double> edc(n + 1, 0.0L);
  for (int64_t i = n - 1; i >= 0; --i) {
    edc[i] = edc[i + 1] + static_cast<long double>(rir[i]) * rir[i];
  }
  if (edc[0] <= 0.0L) throw NumericError("t60 of an all-zero response");
  auto db = [&](int64_t i) {
    return static_cast<double>(10.0L * std::log10(edc[i] / edc[0]));
  };
  auto first_below = [&](double level) -> int64_t {
    for (int64_t i = 0; i < n; ++i) {
      if (edc[i] > 0.0L && db(i) <= level) return i;
      if (edc[i] <= 0.0L) return -1;
    }
    return -1;
  };
  const int64_t begin = first_below(-5.0);
  int64_t end = first_below(-35.0);
  if (end < 0) end = first_below(-25.0);
  if (begin < 0 || end <= begin + 1) throw NumericError("decay curve too short for t60");
  // Least-squares slope of dB against sample index.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double count = static_cast<double>(end - begin + 1);
  for (int64_t i = begin; i <= end; ++i) {
    const double x = static_cast<double>(i), y = db(i);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
  if (!(slope < 0.0)) throw NumericError("energy decay curve is not decreasing");
  return -60.0 / slope / fs;
}

std::vector<double> FftConvolve(const std::vector<double> &a, const std::vector<double> &b,
                                int64_t out_len) {
  if (a.empty() || b.empty()) return std::vector<double>(out_len, 0.0);
  FftConvolver conv(FftSize(static_cast<int64_t>(a.size() + b.size()) - 1));
  auto out = conv.Product(conv.Transform(a), conv.Transform(b),
                          std::min<int64_t>(out_len, a.size() + b.size() - 1));
  out.resize(out_len, 0.0);
  return out;
}

int OverlapBucket(double r) {
  if (r < 0.25) return 0;
  if (r < 0.5) return 1;
  if (r < 0.75) return 2;
  return 3;
}

const char *OverlapBucketName(int bucket) {
  static const char *kNames[kNumOverlapBuckets] = {"<25%", "25-50%", "50-75%", ">75%"};
  if (bucket < 0 || bucket >= kNumOverlapBuckets) throw ConfigError("bad overlap bucket");
  return kNames[bucket];
}

int64_t MixtureSpec::CanvasSamples() const {
  return static_cast<int64_t>(std::llround(duration * room.fs));
}

MixtureSpec SampleMixtureSpec(uint64_t seed, int n_mics, double duration, double fs) {
  if (n_mics < 1) throw ConfigError("n_mics must be positive");
  std::mt19937_64 rng = StreamRng(seed, 1);
  MixtureSpec spec;
  spec.seed = seed;
  spec.n_mics = n_mics;
  spec.duration = duration;
  spec.room.fs = fs;
  spec.room.dims = {Uniform(rng, 3.0, 10.0), Uniform(rng, 3.0, 10.0), Uniform(rng, 2.5, 4.0)};
  spec.room.t60 = Uniform(rng, 0.1, 0.5);
  spec.overlap_ratio = Uniform(rng, 0.0, 1.0);
  spec.rel_snr_db = Uniform(rng, 0.0, 5.0);
  spec.noise_snr_db = Uniform(rng, 10.0, 20.0);

  constexpr int kTries = 1000;
  for (;;) {
    bool ok = true;
    for (int s = 0; s < 3 && ok; ++s) {
      int t = 0;
      for (; t < kTries; ++t) {
        const Vec3 p = UniformPoint(rng, spec.room.dims);
        bool far = true;
        for (int q = 0; q < s; ++q) far = far && Norm(p, spec.source_positions[q]) >= kSourceSpacing;
        if (far) {
          spec.source_positions[s] = p;
          break;
        }
      }
      ok = t < kTries;
    }
    spec.mic_positions.clear();
    for (int m = 0; m < n_mics && ok; ++m) {
      int t = 0;
      for (; t < kTries; ++t) {
        const Vec3 p = UniformPoint(rng, spec.room.dims);
        bool far = true;
        for (const Vec3 &s : spec.source_positions) far = far && Norm(p, s) >= kMicSourceSpacing;
        if (far) {
          spec.mic_positions.push_back(p);
          break;
        }
      }
      ok = t < kTries;
    }
    if (ok) return spec;
  }
}

OverlapLayout ComputeLayout(int64_t canvas, double overlap_ratio) {
  if (canvas < 2) throw ConfigError("canvas must hold at least two samples");
  if (!(overlap_ratio >= 0.0 && overlap_ratio <= 1.0)) {
    throw ConfigError("overlap ratio outside [0, 1]");
  }
  OverlapLayout lay;
  lay.canvas = canvas;
  lay.span = std::clamp<int64_t>(
      std::llround(0.5 * static_cast<double>(canvas) * (1.0 + overlap_ratio)), 1, canvas);
  lay.onset_b = canvas - lay.span;
  return lay;
}

Mixture GenerateMixture(const MixtureSpec &spec, const std::vector<double> &speech_a,
                        const std::vector<double> &speech_b, const std::vector<double> &noise,
                        bool peak_safe) {
  if (spec.n_mics < 1 || static_cast<int>(spec.mic_positions.size()) != spec.n_mics) {
    throw ConfigError("mic_positions does not match n_mics");
  }
  const int64_t n = spec.CanvasSamples();
  const OverlapLayout lay = ComputeLayout(n, spec.overlap_ratio);
  std::mt19937_64 rng = StreamRng(spec.seed, 2);

  auto segment = [&](const std::vector<double> &src, int64_t len, const char *what) {
    if (static_cast<int64_t>(src.size()) < len) {
      throw ConfigError(std::string(what) + " shorter than the required " +
                        std::to_string(len) + " samples");
    }
    const int64_t off = UniformInt(rng, 0, static_cast<int64_t>(src.size()) - len);
    std::vector<double> seg(src.begin() + off, src.begin() + off + len);
    if (MeanPower(seg, 0, len) <= 0.0) {
      throw NumericError(std::string(what) + " segment has zero power");
    }
    return seg;
  };
  const std::vector<double> seg_a = segment(speech_a, lay.span, "speech A");
  const std::vector<double> seg_b = segment(speech_b, n - lay.onset_b, "speech B");
  const std::vector<double> seg_n = segment(noise, n, "noise");

  std::vector<double> a(n, 0.0), b(n, 0.0), v(seg_n);
  std::copy(seg_a.begin(), seg_a.end(), a.begin());
  std::copy(seg_b.begin(), seg_b.end(), b.begin() + lay.onset_b);

  const RelRegion r = RelSnrRegion(lay, a, b);
  const double pa = MeanPower(a, r.a_begin, r.a_end);
  const double pb = MeanPower(b, r.b_begin, r.b_end);
  const double gb = std::sqrt(pa / (pb * std::pow(10.0, spec.rel_snr_db / 10.0)));
  for (double &x : b) x *= gb;

  std::vector<double> speech(n);
  for (int64_t i = 0; i < n; ++i) speech[i] = a[i] + b[i];
  const double gn = std::sqrt(MeanPower(speech, 0, n) /
                              (MeanPower(v, 0, n) * std::pow(10.0, spec.noise_snr_db / 10.0)));
  for (double &x : v) x *= gn;

  const int64_t m = spec.n_mics;
  RoomSpec room = spec.room;
  room.absorption = WallAbsorption(room);
  const int64_t rir_len = DefaultRirLength(room);
  FftConvolver conv(FftSize(n + rir_len - 1));
  const std::array<const std::vector<double> *, 3> dry = {&a, &b, &v};
  std::array<FftConvolver::Spectrum, 3> spectra;
  for (int s = 0; s < 3; ++s) spectra[s] = conv.Transform(*dry[s]);

  std::vector<double> targets(2 * m * n), noise_img(m * n), mixture(m * n, 0.0);
  for (int64_t mic = 0; mic < m; ++mic) {
    for (int s = 0; s < 3; ++s) {
      const auto rir = SimulateRir(room, spec.source_positions[s],
                                   spec.mic_positions[mic], rir_len);
      const auto img = conv.Product(spectra[s], conv.Transform(rir), n);
      double *dst = s < 2 ? &targets[(s * m + mic) * n] : &noise_img[mic * n];
      std::copy(img.begin(), img.end(), dst);
    }
  }
  for (int64_t mic = 0; mic < m; ++mic) {
    for (int64_t i = 0; i < n; ++i) {
      mixture[mic * n + i] = targets[mic * n + i] + targets[(m + mic) * n + i] +
                             noise_img[mic * n + i];
    }
  }

  double gain = 1.0;
  if (peak_safe) {
    double peak = 0.0;
    for (double x : mixture) peak = std::max(peak, std::abs(x));
    if (peak > 0.9) gain = 0.9 / peak;
  }
  std::vector<double> dry_all(3 * n);
  for (int s = 0; s < 3; ++s) std::copy(dry[s]->begin(), dry[s]->end(), dry_all.begin() + s * n);
  if (gain != 1.0) {
    for (auto *buf : {&targets, &noise_img, &mixture, &dry_all}) {
      for (double &x : *buf) x *= gain;
    }
  }

  Mixture out;
  out.spec = spec;
  out.layout = lay;
  out.gain = gain;
  out.mixture = Tensor({m, n}, std::move(mixture));
  out.targets = Tensor({2, m, n}, std::move(targets));
  out.noise_image = Tensor({m, n}, std::move(noise_img));
  out.dry = Tensor({3, n}, std::move(dry_all));
  return out;
}

RealizedSnr MeasureSnr(const Mixture &m) {
  const std::vector<double> a = Row(m.dry, 0), b = Row(m.dry, 1), v = Row(m.dry, 2);
  const RelRegion r = RelSnrRegion(m.layout, a, b);
  const int64_t n = m.layout.canvas;
  std::vector<double> speech(n);
  for (int64_t i = 0; i < n; ++i) speech[i] = a[i] + b[i];
  RealizedSnr out;
  out.rel_db = 10.0 * std::log10(MeanPower(a, r.a_begin, r.a_end) /
                                 MeanPower(b, r.b_begin, r.b_end));
  out.noise_db = 10.0 * std::log10(MeanPower(speech, 0, n) / MeanPower(v, 0, n));
  return out;
}

std::string ManifestLine(const ManifestEntry &e) {
  json j = {{"id", e.id},
            {"mixture_path", e.mixture_path},
            {"target_paths", {e.target_paths[0], e.target_paths[1]}},
            {"n_mics", e.n_mics},
            {"overlap_ratio", e.overlap_ratio},
            {"t60", e.t60},
            {"rel_snr_db", e.rel_snr_db},
            {"noise_snr_db", e.noise_snr_db},
            {"room_dims", {e.room_dims[0], e.room_dims[1], e.room_dims[2]}},
            {"seed", e.seed},
            {"overlap_bucket", e.overlap_bucket}};
  return j.dump();
}

ManifestEntry ParseManifestLine(const std::string &line) {
  try {
    const json j = json::parse(line);
    ManifestEntry e;
    e.id = j.at("id").get<std::string>();
    e.mixture_path = j.at("mixture_path").get<std::string>();
    const auto &tp = j.at("target_paths");
    if (tp.size() != 2) throw FormatError("manifest: target_paths must hold two paths");
    e.target_paths = {tp[0].get<std::string>(), tp[1].get<std::string>()};
    e.n_mics = j.at("n_mics").get<int>();
    e.overlap_ratio = j.at("overlap_ratio").get<double>();
    e.t60 = j.at("t60").get<double>();
    e.rel_snr_db = j.at("rel_snr_db").get<double>();
    e.noise_snr_db = j.at("noise_snr_db").get<double>();
    const auto &rd = j.at("room_dims");
    if (rd.size() != 3) throw FormatError("manifest: room_dims must hold three values");
    e.room_dims = {rd[0].get<double>(), rd[1].get<double>(), rd[2].get<double>()};
    e.seed = j.at("seed").get<uint64_t>();
    e.overlap_bucket = j.contains("overlap_bucket") ? j["overlap_bucket"].get<int>()
                                                     : OverlapBucket(e.overlap_ratio);
    return e;
  } catch (const json::exception &ex) {
    throw FormatError(std::string("manifest: ") + ex.what());
  }
}

std::vector<ManifestEntry> ReadManifest(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path);
  std::vector<ManifestEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(ParseManifestLine(line));
  }
  return out;
}

uint64_t UtteranceSeed(uint64_t seed, int64_t index) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                    static_cast<uint32_t>(index), static_cast<uint32_t>(index >> 32)};
  std::array<uint32_t, 2> words;
  seq.generate(words.begin(), words.end());
  return (static_cast<uint64_t>(words[0]) << 32) | words[1];
}

std::vector<std::string> ListWavFiles(const std::string &dir) {
  std::error_code ec;
  fs::directory_iterator it(dir, ec);
  if (ec) throw IoError("cannot list " + dir + ": " + ec.message());
  std::vector<std::string> out;
  for (const auto &entry : it) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav") {
      out.push_back(entry.path().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<ManifestEntry> BuildDataset(const DatasetOptions &opts) {
  if (opts.n_utts < 1) throw ConfigError("n_utts must be positive");
  if (opts.out_dir.empty()) throw ConfigError("out_dir is empty");
  if (opts.min_mics < 1 || opts.max_mics < opts.min_mics) {
    throw ConfigError("bad microphone range");
  }
  if (opts.speech_files.size() < 2) throw ConfigError("need at least two speech files");
  if (opts.noise_files.empty()) throw ConfigError("need at least one noise file");

  std::vector<std::vector<double>> speech, noise;
  for (const auto &p : opts.speech_files) speech.push_back(MonoSamples(ReadWav(p), p, opts.fs));
  for (const auto &p : opts.noise_files) noise.push_back(MonoSamples(ReadWav(p), p, opts.fs));

  const fs::path root(opts.out_dir);
  for (const char *sub : {"mix", "s1", "s2"}) EnsureDir(root / sub);
  const fs::path manifest_path = root / "manifest.jsonl";
  std::ofstream manifest(manifest_path);
  if (!manifest) throw IoError("cannot write " + manifest_path.string());

  auto pick = [](std::mt19937_64 &rng, const std::vector<std::vector<double>> &pool,
                 int64_t min_len, int64_t exclude) -> int64_t {
    std::vector<int64_t> ok;
    for (int64_t i = 0; i < static_cast<int64_t>(pool.size()); ++i) {
      if (i != exclude && static_cast<int64_t>(pool[i].size()) >= min_len) ok.push_back(i);
    }
    if (ok.empty()) return -1;
    return ok[UniformInt(rng, 0, static_cast<int64_t>(ok.size()) - 1)];
  };

  const int span_mics = opts.max_mics - opts.min_mics + 1;
  std::vector<ManifestEntry> entries;
  for (int i = 0; i < opts.n_utts; ++i) {
    const int mics = opts.min_mics + i % span_mics;
    const MixtureSpec spec =
        SampleMixtureSpec(UtteranceSeed(opts.seed, i), mics, opts.duration, opts.fs);
    const OverlapLayout lay = ComputeLayout(spec.CanvasSamples(), spec.overlap_ratio);
    std::mt19937_64 rng = StreamRng(spec.seed, 3);
    const int64_t ia = pick(rng, speech, lay.span, -1);
    const int64_t ib = ia < 0 ? -1 : pick(rng, speech, lay.canvas - lay.onset_b, ia);
    const int64_t in = pick(rng, noise, lay.canvas, -1);
    if (ia < 0 || ib < 0 || in < 0) {
      throw ConfigError("corpus exhausted: not enough files long enough for utterance " +
                        std::to_string(i));
    }
    const Mixture mix = GenerateMixture(spec, speech[ia], speech[ib], noise[in]);

    char id[32];
    std::snprintf(id, sizeof(id), "utt%05d", i);
    ManifestEntry e;
    e.id = id;
    e.mixture_path = std::string("mix/") + id + ".wav";
    e.target_paths = {std::string("s1/") + id + ".wav", std::string("s2/") + id + ".wav"};
    e.n_mics = mics;
    e.overlap_ratio = spec.overlap_ratio;
    e.t60 = spec.room.t60;
    e.rel_snr_db = spec.rel_snr_db;
    e.noise_snr_db = spec.noise_snr_db;
    e.room_dims = spec.room.dims;
    e.seed = spec.seed;
    e.overlap_bucket = OverlapBucket(spec.overlap_ratio);

    const int64_t fs = static_cast<int64_t>(opts.fs);
    const int64_t n = lay.canvas;
    WriteWav((root / e.mixture_path).string(), {fs, mix.mixture});
    for (int s = 0; s < 2; ++s) {
      auto d = mix.targets.data();
      std::vector<double> img(d.begin() + s * mics * n, d.begin() + (s + 1) * mics * n);
      WriteWav((root / e.target_paths[s]).string(), {fs, Tensor({mics, n}, std::move(img))});
    }
    manifest << ManifestLine(e) << '\n';
    entries.push_back(std::move(e));
  }
  manifest.flush();
  if (!manifest) throw IoError("write failed for " + manifest_path.string());
  return entries;
}

std::vector<double> SynthesizeSpeech(std::mt19937_64 &rng, int64_t samples, double fs) {
  std::vector<double> out(samples, 0.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  int64_t pos = UniformInt(rng, 0, static_cast<int64_t>(0.05 * fs));
  double f0 = Uniform(rng, 90.0, 240.0);
  double phase = 0.0;
  while (pos < samples) {
    const int64_t syl = static_cast<int64_t>(Uniform(rng, 0.08, 0.25) * fs);
    const double f_end = std::clamp(f0 * Uniform(rng, 0.8, 1.25), 80.0, 300.0);
    // Two resonances shape the harmonic amplitudes of each syllable.
    const double fa = Uniform(rng, 300.0, 900.0), fb = Uniform(rng, 900.0, 2500.0);
    const double level = Uniform(rng, 0.4, 1.0);
    const double breath = Uniform(rng, 0.0, 0.05);
    for (int64_t i = 0; i < syl && pos + i < samples; ++i) {
      const double u = static_cast<double>(i) / syl;
      const double f = f0 + (f_end - f0) * u;
      phase += 2.0 * kPi * f / fs;
      if (phase > 2.0 * kPi) phase -= 2.0 * kPi;
      double x = 0.0;
      for (int k = 1; k * f < 0.45 * fs && k <= 40; ++k) {
        const double hk = k * f;
        const double env = 1.0 / (1.0 + std::pow((hk - fa) / 150.0, 2)) +
                           0.5 / (1.0 + std::pow((hk - fb) / 250.0, 2)) + 0.02;
        x += env * std::sin(k * phase) / k;
      }
      const double win = std::sin(kPi * u);
      out[pos + i] = level * win * win * (x + breath * gauss(rng));
    }
    f0 = f_end;
    pos += syl + static_cast<int64_t>(Uniform(rng, 0.0, 0.15) * fs);
  }
  double peak = 0.0;
  for (double v : out) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    for (double &v : out) v *= 0.5 / peak;
  }
  return out;
}

std::vector<double> SynthesizeNoise(std::mt19937_64 &rng, int64_t samples, double fs) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double pole = Uniform(rng, 0.5, 0.95);
  const double mod_hz = Uniform(rng, 0.2, 2.0);
  std::vector<double> out(samples);
  double state = 0.0;
  long double power = 0.0L;
  for (int64_t i = 0; i < samples; ++i) {
    state = pole * state + (1.0 - pole) * gauss(rng);
    out[i] = state * (1.0 + 0.3 * std::sin(2.0 * kPi * mod_hz * i / fs));
    power += static_cast<long double>(out[i]) * out[i];
  }
  const double rms = std::sqrt(static_cast<double>(power / std::max<int64_t>(samples, 1)));
  if (rms > 0.0) {
    for (double &v : out) v *= 0.1 / rms;
  }
  return out;
}

void WriteSyntheticCorpus(const std::string &dir, int n_speech, int n_noise, double seconds,
                          uint64_t seed, double fs) {
  if (n_speech < 0 || n_noise < 0 || !(seconds > 0.0)) {
    throw ConfigError("bad synthetic corpus size");
  }
  const fs::path root(dir);
  EnsureDir(root / "speech");
  EnsureDir(root / "noise");
  const int64_t samples = static_cast<int64_t>(std::llround(seconds * fs));
  const int64_t rate = static_cast<int64_t>(fs);
  char name[32];
  for (int i = 0; i < n_speech; ++i) {
    std::mt19937_64 rng = StreamRng(UtteranceSeed(seed, i), 4);
    std::snprintf(name, sizeof(name), "%03d.wav", i);
    WriteWav((root / "speech" / name).string(),
             {rate, Tensor({1, samples}, SynthesizeSpeech(rng, samples, fs))});
  }
  for (int i = 0; i < n_noise; ++i) {
    std::mt19937_64 rng = StreamRng(UtteranceSeed(seed, i), 5);
    std::snprintf(name, sizeof(name), "%03d.wav", i);
    WriteWav((root / "noise" / name).string(),
             {rate, Tensor({1, samples}, SynthesizeNoise(rng, samples, fs))});
  }
}

}  // namespace ifasnet
