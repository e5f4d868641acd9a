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

// JSON checkpoints. Parameter values are stored bit-exactly as hex-encoded
// little-endian IEEE-754 doubles, in declaration order.

#include "waveflow/flow.hpp"
#include "waveflow/wavelet_flow.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace waveflow {

inline constexpr const char* kCheckpointFormat = "waveflow-checkpoint";
inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string encode_doubles(const Eigen::ArrayXd& values);
Eigen::ArrayXd decode_doubles(const std::string& hex);

nlohmann::json glow_config_json(const GlowConfig& config);
GlowConfig glow_config_from_json(const nlohmann::json& j);
nlohmann::json waveletflow_config_json(const WaveletFlowConfig& config);
WaveletFlowConfig waveletflow_config_from_json(const nlohmann::json& j);

nlohmann::json checkpoint_json(const FlowModel& model);
nlohmann::json checkpoint_json(const WaveletFlowModel& model);
FlowModel glow_from_checkpoint(const nlohmann::json& j);
WaveletFlowModel waveletflow_from_checkpoint(const nlohmann::json& j);

void save_checkpoint(const FlowModel& model, const std::filesystem::path& path);
void save_checkpoint(const WaveletFlowModel& model, const std::filesystem::path& path);
// Parses the file; throws CheckpointError on any format problem.
nlohmann::json read_checkpoint(const std::filesystem::path& path);
FlowModel load_glow(const std::filesystem::path& path);
WaveletFlowModel load_waveletflow(const std::filesystem::path& path);

}  // namespace waveflow
