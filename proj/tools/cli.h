// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Command-line front end: simulate, synth-corpus, train, separate, evaluate
// and selfcheck.

#ifndef IFASNET_TOOLS_CLI_H_
#define IFASNET_TOOLS_CLI_H_

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "ifasnet/model.h"
#include "ifasnet/training.h"

namespace ifasnet::cli {

enum ExitCode {
  kOk = 0,
  kCheckFailed = 1,
  kBadArgs = 2,
  kIoError = 3,
  kDiverged = 4,
  kMismatch = 5,
};

struct RunConfig {
  std::string preset;
  ModelConfig model;
  TrainConfig train;
};

// Preset first, then `key=value` lines from the file, then `overrides`
// (later entries win). `preset` may be empty, in which case a "preset" key in
// the file selects it, falling back to "ifasnet". Throws ConfigError on an
// unknown key or malformed value and IoError when the file cannot be read.
RunConfig LoadRunConfig(const std::string &preset, const std::string &config_path,
                        const std::vector<std::pair<std::string, std::string>> &overrides = {});

// Applies one key; throws ConfigError on an unknown key or bad value.
void ApplyConfigKey(RunConfig &cfg, const std::string &key, const std::string &value);

// Resolved configuration as flat `key=value` lines, readable by LoadRunConfig.
std::string ConfigText(const RunConfig &cfg);

// Runs the tool with argv-style arguments (args[0] is the program name).
// Returns the process exit code.
int RunCli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

}  // namespace ifasnet::cli

#endif  // IFASNET_TOOLS_CLI_H_
