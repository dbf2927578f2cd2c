// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Objectives, permutation handling, evaluation metrics, the optimizer and the
// train/evaluate loops.

#ifndef IFASNET_TRAINING_H_
#define IFASNET_TRAINING_H_

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ifasnet/model.h"
#include "ifasnet/roomsim.h"
#include "ifasnet/tensor.h"

namespace ifasnet {

inline constexpr double kSnrEps = 1e-8;
inline constexpr double kSiSdrCapDb = 80.0;

// -10 log10(|ref|^2 / (|est - ref|^2 + 1e-8)) over all elements. Throws
// NumericError on a zero-power reference and ShapeError on a length mismatch.
Tensor SnrLoss(const Tensor &est, const Tensor &ref);

// Scale-invariant SDR in dB after removing the means, clamped to
// [-80, 80]. Throws NumericError when ref or est is all zeros.
double SiSdr(std::span<const double> est, std::span<const double> ref);
// SI-SDR gain of est over the unprocessed reference-channel mixture.
double SiSdrImprovement(std::span<const double> est, std::span<const double> ref,
                        std::span<const double> mixture);

using BaseLoss = std::function<Tensor(const Tensor &est, const Tensor &ref)>;

struct PitResult {
  Tensor loss;
  // est slot s is matched with reference perm[s].
  std::vector<int> perm;
};

// ests, refs: [S x T]. Minimum over all assignments of the mean per-source
// base loss. Ties keep the earliest permutation in lexicographic order, so
// identity wins.
PitResult PitLoss(const Tensor &ests, const Tensor &refs, const BaseLoss &base = SnrLoss);

// Auxiliary autoencoding: the model sees one source's reverberant image alone
// at every mic ([M x T]); its source slots, summed, must reproduce target [T].
// With a [target, zeros] reference the PIT-aligned sum is the same for every
// assignment, so alignment is implicit.
Tensor A2tLoss(const Model &model, const Tensor &single_source, const Tensor &target);

struct TrainConfig {
  double lr = 1e-3;
  double lr_decay = 0.98;
  int decay_every = 2;  // epochs
  double max_grad_norm = 5.0;
  int epochs = 100;
  int early_stop_patience = 10;
  double a2t_weight = 1.0;
  int batch_size = 1;
  // Random crop length per training example; 0 keeps whole utterances.
  int64_t segment_samples = 0;
  uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void Validate() const;
};

// lr * lr_decay^floor(epoch / decay_every) for 1-based epochs.
double LearningRate(const TrainConfig &cfg, int epoch);

// Global L2 norm of the parameter gradients (missing gradients count as 0).
double GradNorm(const std::vector<Tensor> &params);
// Rescales gradients so the global norm is at most max_norm. Returns the norm
// before clipping (non-finite when a gradient is).
double ClipGradNorm(const std::vector<Tensor> &params, double max_norm);

class Adam {
 public:
  Adam(std::vector<Tensor> params, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);
  // Applies one update from the parameters' current gradients. Returns false
  // and leaves everything untouched when a gradient is non-finite.
  bool Step(double lr);
  int64_t steps() const { return steps_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  double beta1_, beta2_, eps_;
  int64_t steps_ = 0;
};

struct Example {
  std::string id;
  Tensor mixture;  // [M x T]
  Tensor targets;  // [2 x M x T]
  double overlap_ratio = 0.0;
};

// Reads an utterance's WAVs; paths in the entry are relative to base_dir.
Example LoadExample(const ManifestEntry &entry, const std::string &base_dir,
                    int64_t sample_rate = 16000);
std::vector<Example> LoadExamples(const std::string &manifest_path,
                                  int64_t sample_rate = 16000);

// Reference-channel targets [2 x T] of an example.
Tensor ReferenceTargets(const Example &ex, int64_t ref_channel);

struct StepLoss {
  double total = 0.0;
  double separation = 0.0;
  double a2t = 0.0;
};

// Mixture PIT loss plus a2t_weight times the mean A2T term over sources.
// Records onto the current tape.
Tensor TrainingLoss(const Model &model, const Example &ex, double a2t_weight,
                    StepLoss *parts = nullptr);

// Mean PIT SNR loss without gradient tracking.
double ValidationLoss(const Model &model, const std::vector<Example> &data);

// One optimizer step per call over a batch of examples.
class Trainer {
 public:
  Trainer(Model &model, const TrainConfig &cfg);
  // Averages the loss over the batch (random crops when segment_samples is
  // set), clips, and steps Adam. Throws NumericError when the loss is
  // non-finite.
  StepLoss Step(const std::vector<const Example *> &batch, double lr);
  const Adam &optimizer() const { return adam_; }
  int64_t skipped_steps() const { return skipped_; }

 private:
  Model &model_;
  TrainConfig cfg_;
  Adam adam_;
  std::mt19937_64 rng_;
  int64_t skipped_ = 0;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};
std::string EpochLogLine(const EpochLog &e);

struct TrainResult {
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  bool early_stopped = false;
};

struct TrainPaths {
  std::string checkpoint;  // best-validation model; empty to skip
  std::string log;         // JSONL epoch log; empty to skip
};

// Full loop with per-epoch validation, best checkpointing and early stopping.
// An empty validation set validates on the training set.
TrainResult Train(Model &model, const std::vector<Example> &train,
                  const std::vector<Example> &val, const TrainConfig &cfg,
                  const TrainPaths &paths = {});

// Epoch driver used by Train, exposed so early stopping can be exercised with
// a stub. run_epoch returns {train_loss, val_loss}; on_best fires whenever the
// validation loss improves, on_epoch after every epoch. Throws NumericError
// when a loss is non-finite.
using EpochFn = std::function<std::pair<double, double>(int epoch, double lr)>;
TrainResult RunEpochs(const TrainConfig &cfg, const EpochFn &run_epoch,
                      const std::function<void(int epoch)> &on_best = {},
                      const std::function<void(const EpochLog &)> &on_epoch = {});

// Model parameters plus a "meta.config" tensor holding the configuration.
void SaveModel(const std::string &path, const Model &model);
Model LoadModel(const std::string &path);

struct UtteranceScore {
  std::string id;
  int n_mics = 0;
  double overlap_ratio = 0.0;
  int bucket = 0;
  std::vector<int> perm;
  std::vector<double> si_sdr;   // per reference source
  std::vector<double> si_sdri;  // per reference source
  double mean_si_sdri = 0.0;
};

struct CellStats {
  double sum = 0.0;
  int count = 0;
  std::optional<double> mean() const {
    return count > 0 ? std::optional<double>(sum / count) : std::nullopt;
  }
};

struct EvalReport {
  std::vector<UtteranceScore> utterances;
  std::array<CellStats, kNumOverlapBuckets> buckets;
  std::map<int, CellStats> mics;
  std::map<std::pair<int, int>, CellStats> grid;  // (bucket, n_mics)
  CellStats overall;

  void Add(UtteranceScore u);
  std::string ToJson() const;
  static EvalReport FromJson(const std::string &text);
};

using SeparateFn = std::function<Tensor(const Tensor &mixture)>;

// Scores best-permutation SI-SDRi at the reference channel for every
// manifest entry.
EvalReport Evaluate(const SeparateFn &separate, const std::vector<ManifestEntry> &entries,
                    const std::string &base_dir, int64_t ref_channel = 0);

// Separator that returns the reference-channel mixture for every source.
SeparateFn IdentitySeparator(int64_t n_sources = 2, int64_t ref_channel = 0);

}  // namespace ifasnet

#endif  // IFASNET_TRAINING_H_
