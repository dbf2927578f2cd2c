// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ifasnet/training.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <numeric>

#include "ifasnet/checkpoint.h"
#include "ifasnet/error.h"
#include "ifasnet/ops.h"
#include "ifasnet/wav.h"
#include "json.hpp"

namespace ifasnet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kConfigTensor[] = "meta.config";

double Energy(std::span<const double> x) {
  long double acc = 0.0L;
  for (double v : x) acc += static_cast<long double>(v) * v;
  return static_cast<double>(acc);
}

std::vector<double> Centered(std::span<const double> x) {
  long double mean = 0.0L;
  for (double v : x) mean += v;
  mean /= std::max<size_t>(x.size(), 1);
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = static_cast<double>(x[i] - mean);
  return out;
}

std::span<const double> Row(const Tensor &t, int64_t row) {
  const int64_t n = t.dim(t.rank() - 1);
  return t.data().subspan(row * n, n);
}

// Copies samples [offset, offset + len) of every row of x (last axis).
Tensor CropLast(const Tensor &x, int64_t offset, int64_t len) {
  const int64_t n = x.dim(x.rank() - 1);
  const int64_t rows = x.numel() / n;
  std::vector<double> out(rows * len);
  for (int64_t r = 0; r < rows; ++r) {
    std::copy_n(x.data().begin() + r * n + offset, len, out.begin() + r * len);
  }
  Shape shape = x.shape();
  shape.back() = len;
  return Tensor(shape, std::move(out));
}

json CellJson(const CellStats &c) {
  json j = {{"count", c.count}};
  j["mean"] = c.mean() ? json(*c.mean()) : json(nullptr);
  return j;
}

}  // namespace

Tensor SnrLoss(const Tensor &est, const Tensor &ref) {
  if (est.shape() != ref.shape()) {
    throw ShapeError("snr_loss: est " + ShapeString(est.shape()) + " vs ref " +
                     ShapeString(ref.shape()));
  }
  const double power = Energy(ref.data());
  if (!(power > 0.0)) throw NumericError("snr_loss: reference has zero power");
  const Tensor err = Sum(Square(Sub(est, ref)));
  const double k = 10.0 / std::numbers::ln10;
  return AddScalar(Scale(Log(AddScalar(err, kSnrEps)), k), -10.0 * std::log10(power));
}

double SiSdr(std::span<const double> est, std::span<const double> ref) {
  if (est.size() != ref.size()) throw ShapeError("si_sdr: length mismatch");
  const std::vector<double> s = Centered(ref), e = Centered(est);
  const double ref_energy = Energy(s);
  if (!(ref_energy > 0.0)) throw NumericError("si_sdr: reference is zero");
  if (!(Energy(e) > 0.0)) throw NumericError("si_sdr: estimate is zero");
  long double dot = 0.0L;
  for (size_t i = 0; i < s.size(); ++i) dot += static_cast<long double>(e[i]) * s[i];
  const double alpha = static_cast<double>(dot) / ref_energy;
  long double target = 0.0L, noise = 0.0L;
  for (size_t i = 0; i < s.size(); ++i) {
    const double t = alpha * s[i];
    const double n = e[i] - t;
    target += static_cast<long double>(t) * t;
    noise += static_cast<long double>(n) * n;
  }
  if (noise <= 0.0L) return kSiSdrCapDb;
  if (target <= 0.0L) return -kSiSdrCapDb;
  const double db = static_cast<double>(10.0L * std::log10(target / noise));
  return std::clamp(db, -kSiSdrCapDb, kSiSdrCapDb);
}

double SiSdrImprovement(std::span<const double> est, std::span<const double> ref,
                        std::span<const double> mixture) {
  return SiSdr(est, ref) - SiSdr(mixture, ref);
}

PitResult PitLoss(const Tensor &ests, const Tensor &refs, const BaseLoss &base) {
  if (ests.rank() != 2 || ests.shape() != refs.shape()) {
    throw ShapeError("pit_loss: expected matching [S x T], got " + ShapeString(ests.shape()) +
                     " and " + ShapeString(refs.shape()));
  }
  const int s = static_cast<int>(ests.dim(0));
  std::vector<Tensor> pair(s * s);
  for (int i = 0; i < s; ++i) {
    for (int j = 0; j < s; ++j) pair[i * s + j] = base(Select(ests, 0, i), Select(refs, 0, j));
  }
  std::vector<int> perm(s), best;
  std::iota(perm.begin(), perm.end(), 0);
  double best_value = INFINITY;
  do {
    double v = 0.0;
    for (int i = 0; i < s; ++i) v += pair[i * s + perm[i]].item();
    v /= s;
    if (best.empty() || v < best_value) {
      best_value = v;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  Tensor loss = pair[best[0]];
  for (int i = 1; i < s; ++i) loss = Add(loss, pair[i * s + best[i]]);
  return {Scale(loss, 1.0 / s), best};
}

Tensor A2tLoss(const Model &model, const Tensor &single_source, const Tensor &target) {
  return SnrLoss(SumAxis(model.Forward(single_source), 0), target);
}

void TrainConfig::Validate() const {
  if (!(lr > 0.0) || !(lr_decay > 0.0) || decay_every < 1 || !(max_grad_norm > 0.0) ||
      epochs < 1 || early_stop_patience < 1 || !(a2t_weight >= 0.0) || batch_size < 1 ||
      segment_samples < 0 || !(beta1 >= 0.0 && beta1 < 1.0) ||
      !(beta2 >= 0.0 && beta2 < 1.0) || !(adam_eps > 0.0)) {
    throw ConfigError("training configuration holds an out-of-range value");
  }
}

double LearningRate(const TrainConfig &cfg, int epoch) {
  if (epoch < 1) throw ConfigError("epochs are numbered from 1");
  return cfg.lr * std::pow(cfg.lr_decay, epoch / cfg.decay_every);
}

double GradNorm(const std::vector<Tensor> &params) {
  long double acc = 0.0L;
  for (const Tensor &p : params) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) acc += static_cast<long double>(g) * g;
  }
  return static_cast<double>(std::sqrt(acc));
}

double ClipGradNorm(const std::vector<Tensor> &params, double max_norm) {
  const double norm = GradNorm(params);
  if (std::isfinite(norm) && norm > max_norm) {
    const double scale = max_norm / norm;
    for (const Tensor &p : params) {
      if (!p.has_grad()) continue;
      Tensor t = p;
      for (double &g : t.mutable_grad()) g *= scale;
    }
  }
  return norm;
}

Adam::Adam(std::vector<Tensor> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const Tensor &p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

bool Adam::Step(double lr) {
  for (const Tensor &p : params_) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) {
      if (!std::isfinite(g)) return false;
    }
  }
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (size_t k = 0; k < params_.size(); ++k) {
    Tensor p = params_[k];
    const std::vector<double> g = p.has_grad() ? p.grad() : std::vector<double>(p.numel(), 0.0);
    auto w = p.mutable_data();
    auto &m = m_[k];
    auto &v = v_[k];
    for (size_t i = 0; i < g.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
  return true;
}

Example LoadExample(const ManifestEntry &entry, const std::string &base_dir,
                    int64_t sample_rate) {
  const fs::path base(base_dir);
  auto read = [&](const std::string &rel) {
    Audio a = ReadWav((base / rel).string());
    if (a.sample_rate != sample_rate) {
      throw FormatError(rel + ": sample rate " + std::to_string(a.sample_rate) +
                        ", expected " + std::to_string(sample_rate));
    }
    if (a.channels() != entry.n_mics) {
      throw FormatError(rel + ": " + std::to_string(a.channels()) + " channels, manifest says " +
                        std::to_string(entry.n_mics));
    }
    return a.samples;
  };
  Example ex;
  ex.id = entry.id;
  ex.overlap_ratio = entry.overlap_ratio;
  ex.mixture = read(entry.mixture_path);
  const Tensor s1 = read(entry.target_paths[0]);
  const Tensor s2 = read(entry.target_paths[1]);
  if (s1.shape() != ex.mixture.shape() || s2.shape() != ex.mixture.shape()) {
    throw FormatError(entry.id + ": target and mixture lengths differ");
  }
  std::vector<double> t(s1.values());
  t.insert(t.end(), s2.values().begin(), s2.values().end());
  ex.targets = Tensor({2, ex.mixture.dim(0), ex.mixture.dim(1)}, std::move(t));
  return ex;
}

std::vector<Example> LoadExamples(const std::string &manifest_path, int64_t sample_rate) {
  const std::string base = fs::path(manifest_path).parent_path().string();
  std::vector<Example> out;
  for (const ManifestEntry &e : ReadManifest(manifest_path)) {
    out.push_back(LoadExample(e, base, sample_rate));
  }
  return out;
}

Tensor ReferenceTargets(const Example &ex, int64_t ref_channel) {
  const int64_t m = ex.targets.dim(1), n = ex.targets.dim(2);
  if (ref_channel < 0 || ref_channel >= m) throw ShapeError("reference channel out of range");
  std::vector<double> out(2 * n);
  for (int s = 0; s < 2; ++s) {
    std::copy_n(ex.targets.data().begin() + (s * m + ref_channel) * n, n, out.begin() + s * n);
  }
  return Tensor({2, n}, std::move(out));
}

Tensor TrainingLoss(const Model &model, const Example &ex, double a2t_weight,
                    StepLoss *parts) {
  const int64_t ref = model.config().ref_channel;
  const Tensor refs = ReferenceTargets(ex, ref);
  Tensor loss = PitLoss(model.Forward(ex.mixture), refs).loss;
  StepLoss p;
  p.separation = loss.item();
  if (a2t_weight > 0.0) {
    Tensor a2t = A2tLoss(model, Select(ex.targets, 0, 0), Select(refs, 0, 0));
    a2t = Add(a2t, A2tLoss(model, Select(ex.targets, 0, 1), Select(refs, 0, 1)));
    a2t = Scale(a2t, 0.5);
    p.a2t = a2t.item();
    loss = Add(loss, Scale(a2t, a2t_weight));
  }
  p.total = loss.item();
  if (parts != nullptr) *parts = p;
  return loss;
}

double ValidationLoss(const Model &model, const std::vector<Example> &data) {
  if (data.empty()) throw ConfigError("validation set is empty");
  NoGradScope no_grad;
  double total = 0.0;
  for (const Example &ex : data) {
    total += PitLoss(model.Forward(ex.mixture), ReferenceTargets(ex, model.config().ref_channel))
                 .loss.item();
  }
  return total / static_cast<double>(data.size());
}

Trainer::Trainer(Model &model, const TrainConfig &cfg)
    : model_(model),
      cfg_(cfg),
      adam_(model.params().Tensors(), cfg.beta1, cfg.beta2, cfg.adam_eps),
      rng_(cfg.seed) {
  cfg_.Validate();
}

StepLoss Trainer::Step(const std::vector<const Example *> &batch, double lr) {
  if (batch.empty()) throw ConfigError("empty batch");
  model_.params().ZeroGrad();
  StepLoss mean;
  const double w = 1.0 / static_cast<double>(batch.size());
  for (const Example *ex : batch) {
    Example crop = *ex;
    const int64_t n = ex->mixture.dim(1);
    if (cfg_.segment_samples > 0 && n > cfg_.segment_samples) {
      const int64_t len = cfg_.segment_samples;
      const int64_t ref = model_.config().ref_channel;
      // Prefer a window where both reference targets carry energy.
      for (int attempt = 0; attempt < 10; ++attempt) {
        const int64_t off = std::uniform_int_distribution<int64_t>(0, n - len)(rng_);
        crop.mixture = CropLast(ex->mixture, off, len);
        crop.targets = CropLast(ex->targets, off, len);
        const Tensor refs = ReferenceTargets(crop, ref);
        if (Energy(Row(refs, 0)) > 0.0 && Energy(Row(refs, 1)) > 0.0) break;
      }
    }
    StepLoss parts;
    Tensor loss = TrainingLoss(model_, crop, cfg_.a2t_weight, &parts);
    if (!std::isfinite(parts.total)) {
      CurrentTape().Reset();
      throw NumericError("non-finite training loss on " + ex->id);
    }
    CurrentTape().Backward(Scale(loss, w));
    CurrentTape().Reset();
    mean.total += w * parts.total;
    mean.separation += w * parts.separation;
    mean.a2t += w * parts.a2t;
  }
  const std::vector<Tensor> params = model_.params().Tensors();
  ClipGradNorm(params, cfg_.max_grad_norm);
  if (!adam_.Step(lr)) {
    ++skipped_;
    std::cerr << "warning: non-finite gradient, optimizer step skipped\n";
  }
  model_.params().ZeroGrad();
  return mean;
}

std::string EpochLogLine(const EpochLog &e) {
  return json({{"epoch", e.epoch},
               {"train_loss", e.train_loss},
               {"val_loss", e.val_loss},
               {"lr", e.lr}})
      .dump();
}

TrainResult RunEpochs(const TrainConfig &cfg, const EpochFn &run_epoch,
                      const std::function<void(int epoch)> &on_best,
                      const std::function<void(const EpochLog &)> &on_epoch) {
  cfg.Validate();
  TrainResult result;
  int stagnant = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = LearningRate(cfg, epoch);
    const auto [train_loss, val_loss] = run_epoch(epoch, lr);
    if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch));
    }
    const EpochLog log{epoch, train_loss, val_loss, lr};
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
    if (result.best_epoch == 0 || val_loss < result.best_val_loss) {
      result.best_epoch = epoch;
      result.best_val_loss = val_loss;
      stagnant = 0;
      if (on_best) on_best(epoch);
    } else if (++stagnant >= cfg.early_stop_patience) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

TrainResult Train(Model &model, const std::vector<Example> &train,
                  const std::vector<Example> &val, const TrainConfig &cfg,
                  const TrainPaths &paths) {
  if (train.empty()) throw ConfigError("training set is empty");
  Trainer trainer(model, cfg);
  std::ofstream log;
  if (!paths.log.empty()) {
    log.open(paths.log);
    if (!log) throw IoError("cannot write " + paths.log);
  }
  const std::vector<Example> &val_set = val.empty() ? train : val;
  auto run_epoch = [&](int epoch, double lr) -> std::pair<double, double> {
    std::vector<size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle(cfg.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle);
    double total = 0.0;
    int steps = 0;
    for (size_t i = 0; i < order.size(); i += cfg.batch_size) {
      std::vector<const Example *> batch;
      for (size_t j = i; j < std::min(order.size(), i + cfg.batch_size); ++j) {
        batch.push_back(&train[order[j]]);
      }
      total += trainer.Step(batch, lr).total;
      ++steps;
    }
    return {total / steps, ValidationLoss(model, val_set)};
  };
  auto on_best = [&](int) {
    if (!paths.checkpoint.empty()) SaveModel(paths.checkpoint, model);
  };
  auto on_epoch = [&](const EpochLog &e) {
    if (log.is_open()) {
      log << EpochLogLine(e) << '\n';
      log.flush();
      if (!log) throw IoError("write failed for " + paths.log);
    }
  };
  return RunEpochs(cfg, run_epoch, on_best, on_epoch);
}

void SaveModel(const std::string &path, const Model &model) {
  NamedTensors tensors = model.params().entries();
  const std::vector<double> cfg = EncodeConfig(model.config());
  tensors.emplace_back(kConfigTensor, Tensor({static_cast<int64_t>(cfg.size())}, cfg));
  SaveCheckpoint(path, tensors);
}

Model LoadModel(const std::string &path) {
  const NamedTensors tensors = LoadCheckpoint(path);
  const auto it = std::find_if(tensors.begin(), tensors.end(),
                               [](const auto &e) { return e.first == kConfigTensor; });
  if (it == tensors.end()) throw FormatError(path + ": no model configuration");
  Model model(DecodeConfig(it->second.values()), 0);
  model.params().LoadValues(tensors);
  return model;
}

void EvalReport::Add(UtteranceScore u) {
  if (u.bucket < 0 || u.bucket >= kNumOverlapBuckets) throw FormatError("bad overlap bucket");
  for (CellStats *c : {&buckets[u.bucket], &mics[u.n_mics], &grid[{u.bucket, u.n_mics}],
                       &overall}) {
    c->sum += u.mean_si_sdri;
    ++c->count;
  }
  utterances.push_back(std::move(u));
}

std::string EvalReport::ToJson() const {
  json j;
  j["overall"] = CellJson(overall);
  j["buckets"] = json::array();
  for (int b = 0; b < kNumOverlapBuckets; ++b) {
    json c = CellJson(buckets[b]);
    c["bucket"] = OverlapBucketName(b);
    j["buckets"].push_back(c);
  }
  j["mics"] = json::array();
  for (const auto &[m, c] : mics) {
    json e = CellJson(c);
    e["n_mics"] = m;
    j["mics"].push_back(e);
  }
  j["grid"] = json::array();
  for (const auto &[key, c] : grid) {
    json e = CellJson(c);
    e["bucket"] = OverlapBucketName(key.first);
    e["n_mics"] = key.second;
    j["grid"].push_back(e);
  }
  j["utterances"] = json::array();
  for (const UtteranceScore &u : utterances) {
    j["utterances"].push_back({{"id", u.id},
                               {"n_mics", u.n_mics},
                               {"overlap_ratio", u.overlap_ratio},
                               {"bucket", OverlapBucketName(u.bucket)},
                               {"perm", u.perm},
                               {"si_sdr", u.si_sdr},
                               {"si_sdri", u.si_sdri},
                               {"mean_si_sdri", u.mean_si_sdri}});
  }
  return j.dump(2);
}

EvalReport EvalReport::FromJson(const std::string &text) {
  try {
    const json j = json::parse(text);
    EvalReport r;
    for (const json &u : j.at("utterances")) {
      UtteranceScore s;
      s.id = u.at("id").get<std::string>();
      s.n_mics = u.at("n_mics").get<int>();
      s.overlap_ratio = u.at("overlap_ratio").get<double>();
      const std::string bucket = u.at("bucket").get<std::string>();
      s.bucket = -1;
      for (int b = 0; b < kNumOverlapBuckets; ++b) {
        if (bucket == OverlapBucketName(b)) s.bucket = b;
      }
      s.perm = u.at("perm").get<std::vector<int>>();
      s.si_sdr = u.at("si_sdr").get<std::vector<double>>();
      s.si_sdri = u.at("si_sdri").get<std::vector<double>>();
      s.mean_si_sdri = u.at("mean_si_sdri").get<double>();
      r.Add(std::move(s));
    }
    if (j.at("overall").at("count").get<int>() != r.overall.count) {
      throw FormatError("report: overall count disagrees with utterances");
    }
    if (j.at("buckets").size() != kNumOverlapBuckets) {
      throw FormatError("report: expected four overlap buckets");
    }
    return r;
  } catch (const json::exception &ex) {
    throw FormatError(std::string("report: ") + ex.what());
  }
}

EvalReport Evaluate(const SeparateFn &separate, const std::vector<ManifestEntry> &entries,
                    const std::string &base_dir, int64_t ref_channel) {
  EvalReport report;
  for (const ManifestEntry &entry : entries) {
    const Example ex = LoadExample(entry, base_dir);
    const Tensor refs = ReferenceTargets(ex, ref_channel);
    Tensor est;
    {
      NoGradScope no_grad;
      est = separate(ex.mixture);
    }
    if (est.rank() != 2 || est.dim(0) != 2 || est.dim(1) != refs.dim(1)) {
      throw ShapeError(entry.id + ": separator returned " + ShapeString(est.shape()));
    }
    const auto mix = Row(ex.mixture, ref_channel);
    // sdr[i][r]: estimate i scored against reference r.
    double sdr[2][2];
    for (int i = 0; i < 2; ++i) {
      for (int r = 0; r < 2; ++r) sdr[i][r] = SiSdr(Row(est, i), Row(refs, r));
    }
    const bool swap = sdr[0][1] + sdr[1][0] > sdr[0][0] + sdr[1][1];
    UtteranceScore u;
    u.id = entry.id;
    u.n_mics = entry.n_mics;
    u.overlap_ratio = entry.overlap_ratio;
    u.bucket = OverlapBucket(entry.overlap_ratio);
    u.perm = swap ? std::vector<int>{1, 0} : std::vector<int>{0, 1};
    for (int r = 0; r < 2; ++r) {
      const int i = swap ? 1 - r : r;
      u.si_sdr.push_back(sdr[i][r]);
      u.si_sdri.push_back(sdr[i][r] - SiSdr(mix, Row(refs, r)));
    }
    u.mean_si_sdri = 0.5 * (u.si_sdri[0] + u.si_sdri[1]);
    report.Add(std::move(u));
  }
  return report;
}

SeparateFn IdentitySeparator(int64_t n_sources, int64_t ref_channel) {
  return [n_sources, ref_channel](const Tensor &mixture) {
    const auto row = Row(mixture, ref_channel);
    std::vector<double> out;
    for (int64_t s = 0; s < n_sources; ++s) out.insert(out.end(), row.begin(), row.end());
    return Tensor({n_sources, static_cast<int64_t>(row.size())}, std::move(out));
  };
}

}  // namespace ifasnet
