// Copyright 2026 The waveflow Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Command-line runner: `waveflow <command> --config <file> [--out <dir>]
// [--seed <n>] [--threads <n>]`. Configuration is an INI file; every run
// writes the resolved configuration and format versions next to its outputs.

#include "waveflow/data.hpp"
#include "waveflow/flow.hpp"
#include "waveflow/train.hpp"
#include "waveflow/wavelet_flow.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace waveflow {

inline constexpr const char* kVersion = "1.0.0";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ModelFamily { kGlow, kWaveletFlow };

struct ModelSettings {
  ModelFamily family = ModelFamily::kWaveletFlow;
  Index image_size = 32;
  std::optional<int> depth;        // waveletflow only
  int steps = 16;                  // K
  int scales = 3;                  // L, glow only
  std::map<int, int> level_steps;  // waveletflow only
  MaskStrategy mask = MaskStrategy::kChannelHalf;
  Index hidden = 256;
  std::uint64_t seed = 0;

  WaveletFlowConfig waveletflow() const;
  GlowConfig glow() const;
};

struct RunConfig {
  std::filesystem::path base_dir;  // relative paths resolve against this
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 0;
  int threads = 1;

  std::filesystem::path manifest;  // defaults to <out>/dataset/manifest.csv
  SynthConfig synth;
  ModelSettings model;
  TrainConfig train;

  std::filesystem::path checkpoint;  // defaults to <out>/checkpoint.json
  DatasetSplit score_split = DatasetSplit::kTest;
  std::filesystem::path scores;      // defaults to <out>/scores.jsonl
  int bins = 20;
  int sample_count = 8;
  double temperature = 0.7;

  std::filesystem::path resolve(const std::filesystem::path& p) const;
  std::filesystem::path manifest_path() const;
  std::filesystem::path checkpoint_path() const;
  std::filesystem::path scores_path() const;
};

struct CliOverrides {
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

// Parses and validates; throws ConfigError naming the offending key.
RunConfig parse_run_config(const std::string& ini_text,
                           const std::filesystem::path& base_dir = {},
                           const CliOverrides& overrides = {});
RunConfig load_run_config(const std::filesystem::path& path, const CliOverrides& overrides = {});
// Fully resolved configuration in the same INI layout.
std::string resolved_config_ini(const RunConfig& config);

void cmd_synth(const RunConfig& config);
void cmd_train(const RunConfig& config);
void cmd_score(const RunConfig& config);
void cmd_eval(const RunConfig& config);
void cmd_baseline(const RunConfig& config);
void cmd_sample(const RunConfig& config);

// Parses argv, runs one command and returns the process exit code. Errors
// are reported as a single line on `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace waveflow
