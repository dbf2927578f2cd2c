// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cli.h"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "ifasnet/checks.h"
#include "ifasnet/error.h"
#include "ifasnet/ops.h"
#include "ifasnet/roomsim.h"
#include "ifasnet/wav.h"

namespace ifasnet::cli {
namespace {

namespace fs = std::filesystem;

// Peak level separated outputs are scaled down to when they exceed it.
constexpr double kOutputPeak = 0.9;

double ParseDouble(const std::string &key, const std::string &v) {
  size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception &) {
    used = 0;
  }
  if (used == 0 || used != v.size() || !std::isfinite(out)) {
    throw ConfigError("config: " + key + " expects a number, got '" + v + "'");
  }
  return out;
}

int64_t ParseInt(const std::string &key, const std::string &v) {
  const double d = ParseDouble(key, v);
  if (d != std::floor(d) || std::abs(d) > 1e15) {
    throw ConfigError("config: " + key + " expects an integer, got '" + v + "'");
  }
  return static_cast<int64_t>(d);
}

bool ParseBool(const std::string &key, const std::string &v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError("config: " + key + " expects true/false, got '" + v + "'");
}

// "4" or "2..6".
std::pair<int, int> ParseMicRange(const std::string &v) {
  const size_t dots = v.find("..");
  try {
    if (dots == std::string::npos) {
      size_t used = 0;
      const int m = std::stoi(v, &used);
      if (used == v.size()) return {m, m};
    } else {
      size_t u1 = 0, u2 = 0;
      const std::string lo = v.substr(0, dots), hi = v.substr(dots + 2);
      const int a = std::stoi(lo, &u1), b = std::stoi(hi, &u2);
      if (u1 == lo.size() && u2 == hi.size()) return {a, b};
    }
  } catch (const std::exception &) {
  }
  throw ConfigError("--mics expects N or LO..HI, got '" + v + "'");
}

std::string Join(const fs::path &a, const std::string &b) { return (a / b).string(); }

void PrintHistogram(const std::vector<ManifestEntry> &entries, std::ostream &out) {
  std::array<int, kNumOverlapBuckets> buckets{};
  std::map<int, int> mics;
  for (const ManifestEntry &e : entries) {
    ++buckets[e.overlap_bucket];
    ++mics[e.n_mics];
  }
  out << "overlap histogram:";
  for (int b = 0; b < kNumOverlapBuckets; ++b) {
    out << "  " << OverlapBucketName(b) << " " << buckets[b];
  }
  out << "\nmic histogram:";
  for (const auto &[m, n] : mics) out << "  " << m << ":" << n;
  out << "\n";
}

void PrintReport(const EvalReport &r, std::ostream &out) {
  auto cell = [](const CellStats &c) {
    char buf[32];
    if (c.mean()) {
      std::snprintf(buf, sizeof(buf), "%8.2f", *c.mean());
    } else {
      std::snprintf(buf, sizeof(buf), "%8s", "-");
    }
    return std::string(buf);
  };
  out << "SI-SDRi (dB) by overlap bucket x mics\n" << std::setw(10) << "overlap";
  for (const auto &[m, c] : r.mics) out << std::setw(7) << m << "ch";
  out << std::setw(8) << "avg" << "\n";
  for (int b = 0; b < kNumOverlapBuckets; ++b) {
    out << std::setw(10) << OverlapBucketName(b);
    for (const auto &[m, c] : r.mics) {
      auto it = r.grid.find({b, m});
      out << cell(it == r.grid.end() ? CellStats{} : it->second) << " ";
    }
    out << cell(r.buckets[b]) << "\n";
  }
  out << std::setw(10) << "avg";
  for (const auto &[m, c] : r.mics) out << cell(c) << " ";
  out << cell(r.overall) << "\n";
}

std::vector<char *> Argv(std::vector<std::string> &args) {
  std::vector<char *> argv;
  for (std::string &a : args) argv.push_back(a.data());
  return argv;
}

}  // namespace

void ApplyConfigKey(RunConfig &cfg, const std::string &key, const std::string &v) {
  ModelConfig &m = cfg.model;
  TrainConfig &t = cfg.train;
  if (key == "miso") m.miso = ParseBool(key, v);
  else if (key == "implicit") m.implicit = ParseBool(key, v);
  else if (key == "context") m.context = ParseBool(key, v);
  else if (key == "ncc") {
    if (v == "tncc") m.ncc = NccKind::kTime;
    else if (v == "fncc") m.ncc = NccKind::kFeature;
    else throw ConfigError("config: ncc expects tncc or fncc, got '" + v + "'");
  } else if (key == "codec") {
    if (v == "rnn") m.codec = ContextCodecKind::kRnn;
    else if (v == "mlp") m.codec = ContextCodecKind::kMlp;
    else throw ConfigError("config: codec expects rnn or mlp, got '" + v + "'");
  }
  else if (key == "feature_dim") m.feature_dim = ParseInt(key, v);
  else if (key == "hidden") m.hidden = ParseInt(key, v);
  else if (key == "n_blocks") m.n_blocks = ParseInt(key, v);
  else if (key == "chunk_len") m.chunk_len = ParseInt(key, v);
  else if (key == "codec_hidden") m.codec_hidden = ParseInt(key, v);
  else if (key == "frame_len") m.framing.frame_len = ParseInt(key, v);
  else if (key == "hop") m.framing.hop = ParseInt(key, v);
  else if (key == "sample_context") m.framing.sample_context = ParseInt(key, v);
  else if (key == "feature_context") m.framing.feature_context = ParseInt(key, v);
  else if (key == "ref_channel") m.ref_channel = ParseInt(key, v);
  else if (key == "min_mics") m.min_mics = ParseInt(key, v);
  else if (key == "max_mics") m.max_mics = ParseInt(key, v);
  else if (key == "lr") t.lr = ParseDouble(key, v);
  else if (key == "lr_decay") t.lr_decay = ParseDouble(key, v);
  else if (key == "decay_every") t.decay_every = static_cast<int>(ParseInt(key, v));
  else if (key == "max_grad_norm") t.max_grad_norm = ParseDouble(key, v);
  else if (key == "epochs") t.epochs = static_cast<int>(ParseInt(key, v));
  else if (key == "early_stop_patience") t.early_stop_patience = static_cast<int>(ParseInt(key, v));
  else if (key == "a2t_weight") t.a2t_weight = ParseDouble(key, v);
  else if (key == "batch_size") t.batch_size = static_cast<int>(ParseInt(key, v));
  else if (key == "segment_samples") t.segment_samples = ParseInt(key, v);
  else if (key == "seed") t.seed = static_cast<uint64_t>(ParseInt(key, v));
  else throw ConfigError("config: unknown key '" + key + "'");
}

RunConfig LoadRunConfig(const std::string &preset, const std::string &config_path,
                        const std::vector<std::pair<std::string, std::string>> &overrides) {
  std::vector<std::pair<std::string, std::string>> items;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw IoError("cannot read config " + config_path);
    std::vector<CLI::ConfigItem> parsed;
    try {
      parsed = CLI::ConfigINI().from_config(in);
    } catch (const CLI::Error &e) {
      throw ConfigError("config " + config_path + ": " + e.what());
    }
    for (const CLI::ConfigItem &it : parsed) {
      if (it.name == "++" || it.name == "--") {
        throw ConfigError("config " + config_path + ": sections are not supported");
      }
      if (!it.parents.empty()) {
        throw ConfigError("config " + config_path + ": sections are not supported (" +
                          it.fullname() + ")");
      }
      if (it.inputs.size() != 1) {
        throw ConfigError("config " + config_path + ": " + it.name + " needs one value");
      }
      items.emplace_back(it.name, it.inputs.front());
    }
  }
  RunConfig cfg;
  cfg.preset = preset;
  for (const auto &[k, v] : items) {
    if (k == "preset" && preset.empty()) cfg.preset = v;
  }
  if (cfg.preset.empty()) cfg.preset = "ifasnet";
  cfg.model = Preset(cfg.preset);
  using Items = std::vector<std::pair<std::string, std::string>>;
  for (const Items *list : {static_cast<const Items *>(&items), &overrides}) {
    for (const auto &[k, v] : *list) {
      if (k != "preset") ApplyConfigKey(cfg, k, v);
    }
  }
  cfg.model.Validate();
  cfg.train.Validate();
  return cfg;
}

std::string ConfigText(const RunConfig &cfg) {
  const ModelConfig &m = cfg.model;
  const TrainConfig &t = cfg.train;
  std::ostringstream os;
  os << std::setprecision(17);
  os << "preset=" << cfg.preset << "\n"
     << "miso=" << (m.miso ? "true" : "false") << "\n"
     << "implicit=" << (m.implicit ? "true" : "false") << "\n"
     << "ncc=" << (m.ncc == NccKind::kTime ? "tncc" : "fncc") << "\n"
     << "context=" << (m.context ? "true" : "false") << "\n"
     << "codec=" << (m.codec == ContextCodecKind::kRnn ? "rnn" : "mlp") << "\n"
     << "feature_dim=" << m.feature_dim << "\nhidden=" << m.hidden
     << "\nn_blocks=" << m.n_blocks << "\nchunk_len=" << m.chunk_len
     << "\ncodec_hidden=" << m.codec_hidden << "\nframe_len=" << m.framing.frame_len
     << "\nhop=" << m.framing.hop << "\nsample_context=" << m.framing.sample_context
     << "\nfeature_context=" << m.framing.feature_context << "\nref_channel=" << m.ref_channel
     << "\nmin_mics=" << m.min_mics << "\nmax_mics=" << m.max_mics << "\nlr=" << t.lr
     << "\nlr_decay=" << t.lr_decay << "\ndecay_every=" << t.decay_every
     << "\nmax_grad_norm=" << t.max_grad_norm << "\nepochs=" << t.epochs
     << "\nearly_stop_patience=" << t.early_stop_patience << "\na2t_weight=" << t.a2t_weight
     << "\nbatch_size=" << t.batch_size << "\nsegment_samples=" << t.segment_samples
     << "\nseed=" << t.seed << "\n";
  return os.str();
}

int RunCli(const std::vector<std::string> &args_in, std::ostream &out, std::ostream &err) {
  CLI::App app{"Multi-channel speech separation with filter-and-sum networks", "ifasnet"};
  app.require_subcommand(1);

  // simulate
  DatasetOptions sim;
  std::string speech_dir, noise_dir, mic_range = "2..6";
  CLI::App *simulate = app.add_subcommand("simulate", "Generate a reverberant mixture dataset");
  simulate->add_option("--n", sim.n_utts, "Number of utterances")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim.seed, "Dataset seed");
  simulate->add_option("--out", sim.out_dir, "Output directory")->required();
  simulate->add_option("--speech-dir", speech_dir, "Directory of mono 16 kHz speech WAVs")
      ->required();
  simulate->add_option("--noise-dir", noise_dir, "Directory of mono 16 kHz noise WAVs")
      ->required();
  simulate->add_option("--duration", sim.duration, "Mixture length in seconds")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--mics", mic_range, "Mic count N or range LO..HI");

  // synth-corpus
  std::string corpus_dir;
  int n_speech = 8, n_noise = 4;
  double corpus_seconds = 6.0;
  uint64_t corpus_seed = 0;
  CLI::App *synth = app.add_subcommand("synth-corpus", "Write a synthetic speech/noise corpus");
  synth->add_option("--out", corpus_dir, "Output directory")->required();
  synth->add_option("--n-speech", n_speech, "Speech files")->check(CLI::PositiveNumber);
  synth->add_option("--n-noise", n_noise, "Noise files")->check(CLI::PositiveNumber);
  synth->add_option("--seconds", corpus_seconds, "Length of each file")
      ->check(CLI::PositiveNumber);
  synth->add_option("--seed", corpus_seed, "Corpus seed");

  // train
  std::string preset, config_path, manifest, val_manifest, train_out;
  std::vector<std::string> sets;
  CLI::App *train = app.add_subcommand("train", "Train a separation model");
  train->add_option("--preset", preset, "Ablation preset")
      ->check(CLI::IsMember(PresetNames()));
  train->add_option("--config", config_path, "Flat key=value config file");
  train->add_option("--set", sets, "Override one key (key=value); repeatable");
  train->add_option("--manifest", manifest, "Training manifest.jsonl")->required();
  train->add_option("--val-manifest", val_manifest, "Validation manifest.jsonl");
  train->add_option("--out", train_out, "Output directory")->required();

  // separate
  std::string checkpoint, in_wav, sep_out;
  CLI::App *separate = app.add_subcommand("separate", "Separate a multi-channel WAV");
  separate->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  separate->add_option("--in", in_wav, "Multi-channel mixture WAV")->required();
  separate->add_option("--out-dir", sep_out, "Output directory")->required();

  // evaluate
  std::string eval_ckpt, eval_manifest, report_path;
  bool identity = false;
  CLI::App *evaluate = app.add_subcommand("evaluate", "Score SI-SDRi on a manifest");
  auto *ckpt_opt = evaluate->add_option("--checkpoint", eval_ckpt, "Model checkpoint");
  auto *id_flag =
      evaluate->add_flag("--identity", identity, "Score the unprocessed mixture instead");
  ckpt_opt->excludes(id_flag);
  evaluate->add_option("--manifest", eval_manifest, "Manifest to score")->required();
  evaluate->add_option("--report", report_path, "JSON report path")->required();

  // selfcheck
  bool inject_bug = false;
  CLI::App *selfcheck = app.add_subcommand("selfcheck", "Run the invariant suite");
  selfcheck->add_flag("--inject-grad-bug", inject_bug)->group("");

  std::vector<std::string> args = args_in;
  std::vector<char *> argv = Argv(args);
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp &e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError &e) {
    app.exit(e, out, err);
    return kBadArgs;
  }

  try {
    if (*simulate) {
      std::tie(sim.min_mics, sim.max_mics) = ParseMicRange(mic_range);
      sim.speech_files = ListWavFiles(speech_dir);
      sim.noise_files = ListWavFiles(noise_dir);
      const auto entries = BuildDataset(sim);
      out << "manifest: " << Join(sim.out_dir, "manifest.jsonl") << "\n";
      out << "utterances: " << entries.size() << "\n";
      PrintHistogram(entries, out);
      return kOk;
    }
    if (*synth) {
      WriteSyntheticCorpus(corpus_dir, n_speech, n_noise, corpus_seconds, corpus_seed);
      out << "speech: " << Join(corpus_dir, "speech") << " (" << n_speech << " files)\n";
      out << "noise: " << Join(corpus_dir, "noise") << " (" << n_noise << " files)\n";
      return kOk;
    }
    if (*train) {
      std::vector<std::pair<std::string, std::string>> overrides;
      for (const std::string &s : sets) {
        const size_t eq = s.find('=');
        if (eq == std::string::npos || eq == 0) {
          err << "--set expects key=value, got '" << s << "'\n";
          return kBadArgs;
        }
        overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
      }
      const RunConfig cfg = LoadRunConfig(preset, config_path, overrides);
      Model model(cfg.model, cfg.train.seed);
      out << "preset: " << cfg.preset << "\n";
      out << "toggles: " << cfg.model.Describe() << "\n";
      out << "parameters: " << model.NumParameters() << "\n";
      const auto train_set = LoadExamples(manifest, cfg.model.sample_rate);
      const auto val_set = val_manifest.empty()
                               ? std::vector<Example>{}
                               : LoadExamples(val_manifest, cfg.model.sample_rate);
      out << "train utterances: " << train_set.size() << ", validation utterances: "
          << (val_manifest.empty() ? train_set.size() : val_set.size()) << "\n";
      fs::create_directories(train_out);
      {
        std::ofstream cfg_file(Join(train_out, "config.ini"));
        cfg_file << ConfigText(cfg);
        if (!cfg_file) throw IoError("cannot write " + Join(train_out, "config.ini"));
      }
      const TrainResult r =
          Train(model, train_set, val_set, cfg.train,
                {Join(train_out, "best.ckpt"), Join(train_out, "log.jsonl")});
      for (const EpochLog &e : r.log) out << EpochLogLine(e) << "\n";
      out << "best epoch: " << r.best_epoch << " (val loss " << r.best_val_loss << ")"
          << (r.early_stopped ? ", stopped early" : "") << "\n";
      out << "checkpoint: " << Join(train_out, "best.ckpt") << "\n";
      return kOk;
    }
    if (*separate) {
      const Model model = LoadModel(checkpoint);
      const ModelConfig &mc = model.config();
      const Audio in = ReadWav(in_wav);
      if (in.sample_rate != mc.sample_rate) {
        err << "sample rate " << in.sample_rate << " Hz does not match the model's "
            << mc.sample_rate << " Hz\n";
        return kMismatch;
      }
      if (in.channels() < mc.min_mics || in.channels() > mc.max_mics) {
        err << in.channels() << " channels outside the trained range [" << mc.min_mics
            << ", " << mc.max_mics << "]\n";
        return kMismatch;
      }
      Tensor est;
      {
        NoGradScope no_grad;
        est = model.Forward(in.samples);
      }
      double peak = 0.0;
      for (double v : est.data()) peak = std::max(peak, std::abs(v));
      const double gain = peak > kOutputPeak ? kOutputPeak / peak : 1.0;
      fs::create_directories(sep_out);
      const int64_t n = in.frames();
      for (int64_t s = 0; s < est.dim(0); ++s) {
        std::vector<double> v(est.data().begin() + s * n, est.data().begin() + (s + 1) * n);
        for (double &x : v) x *= gain;
        const std::string path = Join(sep_out, "s" + std::to_string(s + 1) + ".wav");
        WriteWav(path, Audio{in.sample_rate, Tensor({1, n}, std::move(v))});
        out << path << "\n";
      }
      if (gain < 1.0) out << "scaled outputs by " << gain << " to keep peaks below 0.9\n";
      return kOk;
    }
    if (*evaluate) {
      if (!identity && eval_ckpt.empty()) {
        err << "evaluate needs --checkpoint or --identity\n";
        return kBadArgs;
      }
      const auto entries = ReadManifest(eval_manifest);
      const std::string base = fs::path(eval_manifest).parent_path().string();
      EvalReport report;
      if (identity) {
        report = Evaluate(IdentitySeparator(), entries, base);
      } else {
        const Model model = LoadModel(eval_ckpt);
        report = Evaluate(
            [&](const Tensor &mix) {
              NoGradScope no_grad;
              return model.Forward(mix);
            },
            entries, base, model.config().ref_channel);
      }
      std::ofstream rep(report_path);
      rep << report.ToJson() << "\n";
      if (!rep) throw IoError("cannot write report " + report_path);
      PrintReport(report, out);
      out << "report: " << report_path << "\n";
      return kOk;
    }
    if (*selfcheck) {
      testing::SetGradientFault(inject_bug);
      int failed = 0;
      double total = 0.0;
      for (const InvariantCheck &c : SelfCheckSuite()) {
        const CheckResult r = RunCheck(c);
        total += r.seconds;
        if (!r.passed) ++failed;
        char secs[32];
        std::snprintf(secs, sizeof(secs), "%.1fs", r.seconds);
        out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << " [" << secs
            << "]\n"
            << std::flush;
      }
      testing::SetGradientFault(false);
      char secs[32];
      std::snprintf(secs, sizeof(secs), "%.1fs", total);
      out << (failed ? "selfcheck failed: " : "selfcheck passed: ") << failed
          << " failing check(s), " << secs << "\n";
      return failed ? kCheckFailed : kOk;
    }
  } catch (const ConfigError &e) {
    err << "error: " << e.what() << "\n";
    return kBadArgs;
  } catch (const NumericError &e) {
    err << "diverged: " << e.what() << "\n";
    return kDiverged;
  } catch (const ShapeError &e) {
    err << "mismatch: " << e.what() << "\n";
    return kMismatch;
  } catch (const Error &e) {
    // IoError and FormatError: unreadable or malformed files.
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::filesystem::filesystem_error &e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  }
  return kBadArgs;
}

}  // namespace ifasnet::cli
