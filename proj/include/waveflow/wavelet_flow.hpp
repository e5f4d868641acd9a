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

// Wavelet-domain density: an unconditional density on the coarsest low-pass
// image times one conditional flow per pyramid level,
//
//   p(x) = p(L_0) * prod_i p(D_i | L_i),
//
// where D_i are the three detail channels and L_i the same-resolution
// low-pass image fed to the level's coupling networks.

#include "waveflow/flow.hpp"
#include "waveflow/haar.hpp"
#include "waveflow/tensor.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <variant>
#include <vector>

namespace waveflow {

// Diagonal Gaussian with learned mean and log standard deviation over a
// single-element input, used for a 1x1 base image.
class GaussianDensity {
 public:
  explicit GaussianDensity(const std::string& prefix);

  Tensor log_prob(const Tensor& x, const std::optional<Tensor>& condition = {}) const;
  std::vector<std::string> initialize(const Tensor& x,
                                      const std::optional<Tensor>& condition = {});
  Tensor sample(std::mt19937_64& rng, double temperature, Index count) const;
  bool initialized() const { return initialized_; }
  void set_initialized(bool value) { initialized_ = value; }
  Index dimension() const { return 1; }

  ParameterList parameters() { return {&mean, &log_std}; }
  std::vector<const Parameter*> parameters() const { return {&mean, &log_std}; }

  Parameter mean;
  Parameter log_std;

 private:
  bool initialized_ = false;
};

struct WaveletFlowConfig {
  Index image_size = 32;
  std::optional<int> depth;  // defaults to log2(image_size)
  int steps = 16;            // K per level
  std::map<int, int> level_steps;  // optional per-level overrides of K
  MaskStrategy mask = MaskStrategy::kChannelHalf;
  Index hidden = 256;
  std::uint64_t seed = 0;

  int resolved_depth() const;
  int steps_for(int level_index) const;
};

struct LikelihoodReport {
  // Keyed by coarse-first level index; 0 is the base density on L_0.
  std::map<int, LogDensity> per_level;
  std::vector<int> scoring_levels;
  // Mean bits/dim over scoring_levels. Higher means less likely.
  double score = 0.0;

  double bpd(int level_index) const { return per_level.at(level_index).bits_per_dim; }
};

using BaseDensity = std::variant<GaussianDensity, FlowModel>;

class WaveletFlowModel {
 public:
  explicit WaveletFlowModel(WaveletFlowConfig config);

  const WaveletFlowConfig& config() const { return config_; }
  int depth() const { return depth_; }
  Index image_size() const { return config_.image_size; }

  BaseDensity& base() { return base_; }
  const BaseDensity& base() const { return base_; }
  std::map<int, FlowModel>& level_flows() { return level_flows_; }
  const std::map<int, FlowModel>& level_flows() const { return level_flows_; }
  const FlowModel& level_flow(int level_index) const;
  FlowModel& level_flow(int level_index);

  // Spatial extent of level i's detail coefficients.
  Index detail_size(int level_index) const;
  // Levels whose detail coefficients are at least 4x4.
  std::vector<int> scoring_levels() const;

  LogDensity level_nll(int level_index, const Tensor& detail, const Tensor& low) const;
  LikelihoodReport score(const HaarPyramid<double>& pyramid) const;
  // Batched per level; fills one report per pyramid.
  std::vector<LikelihoodReport> score(const std::vector<HaarPyramid<double>>& pyramids) const;

  Image sample(std::mt19937_64& rng, double temperature) const;

  // Parameters of every component in declaration order: base, then levels
  // from coarse to fine.
  ParameterList parameters();
  std::vector<const Parameter*> parameters() const;
  Index coupling_parameter_count() const;

 private:
  WaveletFlowConfig config_;
  int depth_ = 0;
  BaseDensity base_;
  std::map<int, FlowModel> level_flows_;
};

WaveletFlowModel build_waveletflow(const WaveletFlowConfig& config);

// Throws unless the image is S x S with values in [0, 1].
LikelihoodReport score_image(const WaveletFlowModel& model, const Image& image);
std::vector<LikelihoodReport> score_images(const WaveletFlowModel& model,
                                           const std::vector<Image>& images,
                                           int threads = 1);
Image wf_sample(const WaveletFlowModel& model, std::mt19937_64& rng,
                double temperature);

// Tensor views of pyramid planes.
Tensor detail_tensor(const HaarLevel<double>& level);  // [3, h, w]
Tensor low_tensor(const HaarLevel<double>& level);     // [1, h, w]
Tensor plane_tensor(const Image& plane);               // [1, h, w]
// Stacks equally shaped per-sample tensors into a batch.
Tensor stack(const std::vector<Tensor>& samples);

}  // namespace waveflow
