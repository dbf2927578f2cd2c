// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Shoebox room simulation with the image-source method and the ad-hoc array
// mixture recipe used to build training data.

#ifndef IFASNET_ROOMSIM_H_
#define IFASNET_ROOMSIM_H_

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ifasnet/tensor.h"

namespace ifasnet {

using Vec3 = std::array<double, 3>;

inline constexpr int kSincTaps = 81;

struct RoomSpec {
  Vec3 dims = {6.0, 4.0, 3.0};  // meters
  double t60 = 0.3;             // seconds
  double fs = 16000.0;
  double sound_speed = 343.0;
  // Energy absorption applied to every wall. When unset it is derived from
  // t60. 1 means anechoic.
  std::optional<double> absorption;
  // Refine the closed-form absorption so the simulated decay meets t60.
  bool calibrate_decay = true;

  double Volume() const { return dims[0] * dims[1] * dims[2]; }
  double SurfaceArea() const;
  double Diagonal() const;
  bool Inside(const Vec3 &p) const;
};

// Closed-form absorption for the room's T60: Sabine, switching to Eyring when
// the Sabine value reaches 1.
double SabineAbsorption(const RoomSpec &room);

// Absorption used by SimulateRir. The override wins when set. Otherwise the
// Sabine value is refined (when calibrate_decay is on) by simulating a
// reference source/mic pair and rescaling -log(1 - alpha) by the ratio of the
// measured to the requested decay time, a few rounds. The image method decays
// slower than the diffuse-field formulas predict because late energy is carried
// by paths that hit few walls. Throws ConfigError when the result is outside
// (0, 1].
double WallAbsorption(const RoomSpec &room);

// Taps long enough for the decay to pass -60 dB plus the farthest direct path.
int64_t DefaultRirLength(const RoomSpec &room);

// Image-source impulse response from src to mic. rir_len <= 0 selects
// DefaultRirLength. Throws ConfigError on geometry violations.
std::vector<double> SimulateRir(const RoomSpec &room, const Vec3 &src,
                                const Vec3 &mic, int64_t rir_len = 0);

// Index of the direct-path peak: the first local maximum reaching half of the
// free-field amplitude 1 / (4 pi distance). Reflections can exceed a direct
// arrival that falls between samples, so the global maximum is not used.
// Returns -1 when no tap qualifies.
int64_t FindDirectPeak(const std::vector<double> &rir, double distance);

// Tail level in dB: mean energy over the last 10 ms against peak tap energy.
double TailLevelDb(const std::vector<double> &rir, double fs);

// Reverberation time from Schroeder backward integration: a line is fitted to
// the energy decay curve between -5 dB and -35 dB (-25 dB when the curve is
// too short) and extrapolated to -60 dB. Returns seconds.
double EstimateT60(const std::vector<double> &rir, double fs);

// Linear convolution of a and b truncated to out_len samples (FFT based).
std::vector<double> FftConvolve(const std::vector<double> &a,
                                const std::vector<double> &b, int64_t out_len);

// Overlap buckets: [0, .25), [.25, .5), [.5, .75), [.75, 1].
inline constexpr int kNumOverlapBuckets = 4;
int OverlapBucket(double overlap_ratio);
const char *OverlapBucketName(int bucket);

struct MixtureSpec {
  RoomSpec room;
  int n_mics = 2;
  std::vector<Vec3> mic_positions;
  // Speaker A, speaker B, noise.
  std::array<Vec3, 3> source_positions{};
  double overlap_ratio = 0.5;
  double rel_snr_db = 0.0;  // A over B
  double noise_snr_db = 15.0;
  double duration = 4.0;  // canvas length in seconds
  uint64_t seed = 0;

  int64_t CanvasSamples() const;
};

// Placement rules: every point keeps 0.5 m from the walls, sources are 0.5 m
// apart, each mic is 0.3 m from every source.
inline constexpr double kWallClearance = 0.5;
inline constexpr double kSourceSpacing = 0.5;
inline constexpr double kMicSourceSpacing = 0.3;

// Draws room, T60, geometry, overlap and SNRs from the training ranges.
MixtureSpec SampleMixtureSpec(uint64_t seed, int n_mics, double duration = 4.0,
                              double fs = 16000.0);

// Where the two talkers sit on the canvas. A occupies [0, span) and B
// [onset_b, canvas), so overlap / union equals the requested ratio up to one
// sample.
struct OverlapLayout {
  int64_t canvas = 0;
  int64_t span = 0;
  int64_t onset_b = 0;

  int64_t OverlapBegin() const { return onset_b; }
  int64_t OverlapEnd() const { return span; }
  int64_t Overlap() const { return span > onset_b ? span - onset_b : 0; }
  double Ratio() const { return static_cast<double>(Overlap()) / canvas; }
};
OverlapLayout ComputeLayout(int64_t canvas, double overlap_ratio);

struct Mixture {
  MixtureSpec spec;
  OverlapLayout layout;
  Tensor mixture;      // [M x N]
  Tensor targets;      // [2 x M x N] reverberant speaker images
  Tensor noise_image;  // [M x N]
  Tensor dry;          // [3 x N] scaled dry canvases (A, B, noise)
  double gain = 1.0;   // peak-safe factor already applied to every output
};

// Builds one utterance. Source segments are drawn from speech_a, speech_b and
// noise with an RNG derived from spec.seed. Throws ConfigError if a source is
// too short and NumericError if a segment has zero power.
Mixture GenerateMixture(const MixtureSpec &spec, const std::vector<double> &speech_a,
                        const std::vector<double> &speech_b,
                        const std::vector<double> &noise, bool peak_safe = true);

struct RealizedSnr {
  double rel_db = 0.0;    // A vs B over the overlap region (full extents if empty)
  double noise_db = 0.0;  // A + B vs noise over the canvas
};
RealizedSnr MeasureSnr(const Mixture &m);

struct ManifestEntry {
  std::string id;
  std::string mixture_path;  // relative to the manifest directory
  std::array<std::string, 2> target_paths;
  int n_mics = 2;
  double overlap_ratio = 0.0;
  double t60 = 0.0;
  double rel_snr_db = 0.0;
  double noise_snr_db = 0.0;
  Vec3 room_dims{};
  uint64_t seed = 0;
  int overlap_bucket = 0;
};

std::string ManifestLine(const ManifestEntry &e);
ManifestEntry ParseManifestLine(const std::string &line);
std::vector<ManifestEntry> ReadManifest(const std::string &path);

struct DatasetOptions {
  int n_utts = 10;
  uint64_t seed = 0;
  std::string out_dir;
  std::vector<std::string> speech_files;
  std::vector<std::string> noise_files;
  double duration = 4.0;
  int min_mics = 2;
  int max_mics = 6;
  double fs = 16000.0;
};

// Writes mix/, s1/, s2/ WAVs and manifest.jsonl under out_dir. Mic counts
// cycle over [min_mics, max_mics] so every count gets the same number of
// utterances. Returns the manifest entries.
std::vector<ManifestEntry> BuildDataset(const DatasetOptions &opts);

// Per-utterance seed derived from the dataset seed and utterance index.
uint64_t UtteranceSeed(uint64_t seed, int64_t index);

// Lists *.wav files in a directory, sorted by name.
std::vector<std::string> ListWavFiles(const std::string &dir);

// Speech-like test material: voiced harmonic segments with a wandering pitch,
// syllabic amplitude modulation and short pauses.
std::vector<double> SynthesizeSpeech(std::mt19937_64 &rng, int64_t samples, double fs);
// Low-pass coloured noise.
std::vector<double> SynthesizeNoise(std::mt19937_64 &rng, int64_t samples, double fs);

// Writes speech/NNN.wav and noise/NNN.wav under dir.
void WriteSyntheticCorpus(const std::string &dir, int n_speech, int n_noise,
                          double seconds, uint64_t seed, double fs = 16000.0);

}  // namespace ifasnet

#endif  // IFASNET_ROOMSIM_H_
