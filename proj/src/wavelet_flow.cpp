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

#include "waveflow/wavelet_flow.hpp"

#include "waveflow/parallel.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace waveflow {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

Tensor flat_tensor(const Image& plane) {
  Eigen::ArrayXd values = Eigen::Map<const Eigen::ArrayXd>(plane.data(), plane.size());
  return Tensor(Shape{1, plane.rows(), plane.cols()}, std::move(values));
}

}  // namespace

// ---- GaussianDensity --------------------------------------------------------

GaussianDensity::GaussianDensity(const std::string& prefix)
    : mean(prefix + "mean", Shape{1}, Eigen::ArrayXd::Zero(1)),
      log_std(prefix + "log_std", Shape{1}, Eigen::ArrayXd::Zero(1)) {}

Tensor GaussianDensity::log_prob(const Tensor& x,
                                 const std::optional<Tensor>& condition) const {
  if (condition) throw ShapeError("gaussian base takes no condition");
  const Index batch = x.dim(0);
  if (batch == 0 || x.size() != batch) {
    throw ShapeError("gaussian base expects one value per sample, got " +
                     shape_string(x.shape()));
  }
  const Tensor flat = x.reshaped(Shape{batch, 1, 1, 1});
  const Tensor z = channel_affine(flat, mean.tensor(), affine(log_std.tensor(), -1.0));
  return affine(sum_per_sample(square(z)), -0.5, -kHalfLog2Pi) - log_std.tensor();
}

std::vector<std::string> GaussianDensity::initialize(
    const Tensor& x, const std::optional<Tensor>& condition) {
  static_cast<void>(condition);
  const Eigen::ArrayXd& v = x.values();
  const double mu = v.mean();
  const double sd = std::sqrt((v - mu).square().mean());
  mean.mutable_values()(0) = mu;
  std::vector<std::string> warnings;
  if (sd < 1e-8) {
    log_std.mutable_values()(0) = 0.0;
    warnings.push_back(mean.id() + ": zero variance, unit deviation kept");
  } else {
    log_std.mutable_values()(0) = std::log(sd);
  }
  initialized_ = true;
  return warnings;
}

Tensor GaussianDensity::sample(std::mt19937_64& rng, double temperature,
                               Index count) const {
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("sample: temperature must be positive");
  }
  std::normal_distribution<double> normal(0.0, temperature);
  Eigen::ArrayXd v(count);
  const double sd = std::exp(log_std.values()(0));
  for (Index i = 0; i < count; ++i) v(i) = mean.values()(0) + sd * normal(rng);
  return Tensor(Shape{count, 1, 1, 1}, std::move(v));
}

// ---- config -----------------------------------------------------------------

int WaveletFlowConfig::resolved_depth() const {
  if (!is_power_of_two(image_size)) {
    throw std::invalid_argument("waveletflow: image size " +
                                std::to_string(image_size) +
                                " is not a power of two");
  }
  return depth.value_or(log2_size(image_size));
}

int WaveletFlowConfig::steps_for(int level_index) const {
  auto it = level_steps.find(level_index);
  return it == level_steps.end() ? steps : it->second;
}

// ---- tensors ----------------------------------------------------------------

Tensor plane_tensor(const Image& plane) { return flat_tensor(plane); }

Tensor low_tensor(const HaarLevel<double>& level) { return flat_tensor(level.low); }

Tensor detail_tensor(const HaarLevel<double>& level) {
  const Index plane = level.low.size();
  Eigen::ArrayXd values(3 * plane);
  for (int c = 0; c < 3; ++c) {
    values.segment(c * plane, plane) =
        Eigen::Map<const Eigen::ArrayXd>(level.detail[c].data(), plane);
  }
  return Tensor(Shape{3, level.rows(), level.cols()}, std::move(values));
}

Tensor stack(const std::vector<Tensor>& samples) {
  if (samples.empty()) throw ShapeError("stack: no samples");
  const Shape& shape = samples.front().shape();
  const Index per = samples.front().size();
  Eigen::ArrayXd values(per * static_cast<Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].shape() != shape) throw ShapeError("stack: mixed shapes");
    values.segment(static_cast<Index>(i) * per, per) = samples[i].values();
  }
  Shape batched{static_cast<Index>(samples.size())};
  batched.insert(batched.end(), shape.begin(), shape.end());
  return Tensor(std::move(batched), std::move(values));
}

// ---- WaveletFlowModel -------------------------------------------------------

namespace {

BaseDensity make_base(const WaveletFlowConfig& config, int depth) {
  const Index base_size = config.image_size >> depth;
  if (base_size == 1) return GaussianDensity("base.");
  GlowConfig glow;
  glow.steps = config.steps_for(0);
  glow.scales = 1;
  glow.input_shape = Shape{1, base_size, base_size};
  glow.conditioning_channels = 0;
  glow.mask = config.mask;
  glow.hidden = config.hidden;
  glow.seed = derive_seed(config.seed, 0);
  glow.prefix = "base.";
  return FlowModel(glow);
}

}  // namespace

WaveletFlowModel::WaveletFlowModel(WaveletFlowConfig config)
    : config_(std::move(config)),
      depth_(config_.resolved_depth()),
      base_(GaussianDensity("base.")) {
  if (config_.image_size < 4) {
    throw std::invalid_argument("waveletflow: image size must be at least 4");
  }
  if (depth_ < 1 || depth_ > log2_size(config_.image_size)) {
    throw std::invalid_argument("waveletflow: depth out of range");
  }
  base_ = make_base(config_, depth_);
  for (int level = 1; level <= depth_; ++level) {
    const Index h = detail_size(level);
    GlowConfig glow;
    glow.steps = config_.steps_for(level);
    glow.scales = 1;
    glow.input_shape = Shape{3, h, h};
    glow.conditioning_channels = 1;
    glow.mask = config_.mask;
    glow.hidden = config_.hidden;
    glow.seed = derive_seed(config_.seed, static_cast<std::uint64_t>(level));
    glow.prefix = "level" + std::to_string(level) + ".";
    level_flows_.emplace(level, FlowModel(glow));
  }
}

WaveletFlowModel build_waveletflow(const WaveletFlowConfig& config) {
  return WaveletFlowModel(config);
}

const FlowModel& WaveletFlowModel::level_flow(int level_index) const {
  auto it = level_flows_.find(level_index);
  if (it == level_flows_.end()) {
    throw std::out_of_range("waveletflow: unknown level " + std::to_string(level_index));
  }
  return it->second;
}

FlowModel& WaveletFlowModel::level_flow(int level_index) {
  return const_cast<FlowModel&>(std::as_const(*this).level_flow(level_index));
}

Index WaveletFlowModel::detail_size(int level_index) const {
  return config_.image_size >> (depth_ - level_index + 1);
}

std::vector<int> WaveletFlowModel::scoring_levels() const {
  std::vector<int> levels;
  for (int level = 1; level <= depth_; ++level) {
    if (detail_size(level) >= 4) levels.push_back(level);
  }
  return levels;
}

LogDensity WaveletFlowModel::level_nll(int level_index, const Tensor& detail,
                                       const Tensor& low) const {
  NoGradGuard no_grad;
  return flow_log_likelihood(level_flow(level_index), detail, low);
}

LikelihoodReport WaveletFlowModel::score(const HaarPyramid<double>& pyramid) const {
  return score(std::vector<HaarPyramid<double>>{pyramid}).front();
}

std::vector<LikelihoodReport> WaveletFlowModel::score(
    const std::vector<HaarPyramid<double>>& pyramids) const {
  NoGradGuard no_grad;
  std::vector<LikelihoodReport> reports(pyramids.size());
  if (pyramids.empty()) return reports;
  for (const auto& p : pyramids) {
    if (p.depth() != depth_) {
      throw std::invalid_argument("waveletflow: pyramid depth " +
                                  std::to_string(p.depth()) + " != model depth " +
                                  std::to_string(depth_));
    }
  }
  std::vector<Tensor> bases;
  for (const auto& p : pyramids) bases.push_back(plane_tensor(p.base));
  const Tensor base_batch = stack(bases);
  const Tensor base_lp = std::visit(
      [&](const auto& density) { return density.log_prob(base_batch); }, base_);
  const Index base_dims = pyramids.front().base.size();
  for (std::size_t i = 0; i < pyramids.size(); ++i) {
    reports[i].per_level[0] =
        LogDensity::from_log_likelihood(base_lp.values()(static_cast<Index>(i)), base_dims);
  }
  for (const auto& [level, flow] : level_flows_) {
    std::vector<Tensor> details, lows;
    for (const auto& p : pyramids) {
      const HaarLevel<double>& l = p.level(level);
      details.push_back(detail_tensor(l));
      lows.push_back(low_tensor(l));
    }
    const auto densities = flow_log_likelihoods(flow, stack(details), stack(lows));
    for (std::size_t i = 0; i < pyramids.size(); ++i) {
      reports[i].per_level[level] = densities[i];
    }
  }
  const std::vector<int> scoring = scoring_levels();
  for (auto& r : reports) {
    r.scoring_levels = scoring;
    double total = 0.0;
    for (int level : scoring) total += r.bpd(level);
    r.score = scoring.empty() ? 0.0 : total / static_cast<double>(scoring.size());
  }
  return reports;
}

Image WaveletFlowModel::sample(std::mt19937_64& rng, double temperature) const {
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("sample: temperature must be positive");
  }
  NoGradGuard no_grad;
  const Index base_size = config_.image_size >> depth_;
  const Tensor base = std::visit(
      [&](const auto& density) { return density.sample(rng, temperature, 1); }, base_);
  Image current = Eigen::Map<const Image>(base.values().data(), base_size, base_size);
  for (int level = 1; level <= depth_; ++level) {
    const Index h = detail_size(level);
    const Tensor cond = plane_tensor(current).reshaped(Shape{1, 1, h, h});
    const Tensor d = level_flow(level).sample(rng, temperature, 1, cond);
    HaarLevel<double> step;
    step.low = current;
    step.level_index = level;
    for (int c = 0; c < 3; ++c) {
      step.detail[c] = Eigen::Map<const Image>(d.values().data() + c * h * h, h, h);
    }
    current = haar_inverse(step);
  }
  return current;
}

ParameterList WaveletFlowModel::parameters() {
  ParameterList out = std::visit([](auto& d) { return d.parameters(); }, base_);
  for (auto& [level, flow] : level_flows_) {
    auto p = flow.parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<const Parameter*> WaveletFlowModel::parameters() const {
  std::vector<const Parameter*> out =
      std::visit([](const auto& d) { return d.parameters(); }, base_);
  for (const auto& [level, flow] : level_flows_) {
    auto p = flow.parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

Index WaveletFlowModel::coupling_parameter_count() const {
  Index n = 0;
  if (const auto* f = std::get_if<FlowModel>(&base_)) n += f->coupling_parameter_count();
  for (const auto& [level, flow] : level_flows_) n += flow.coupling_parameter_count();
  return n;
}

// ---- free functions ---------------------------------------------------------

namespace {

void validate_image(const WaveletFlowModel& model, const Image& image) {
  if (image.rows() != model.image_size() || image.cols() != model.image_size()) {
    throw ShapeError(
        "score_image: expected " + std::to_string(model.image_size()) + "x" +
        std::to_string(model.image_size()) + " image, got " +
        std::to_string(image.rows()) + "x" + std::to_string(image.cols()));
  }
  if (!image.allFinite() || image.minCoeff() < 0.0 || image.maxCoeff() > 1.0) {
    throw std::invalid_argument("score_image: pixel values must lie in [0, 1]");
  }
}

}  // namespace

LikelihoodReport score_image(const WaveletFlowModel& model, const Image& image) {
  validate_image(model, image);
  return model.score(build_pyramid(image, model.depth()));
}

std::vector<LikelihoodReport> score_images(const WaveletFlowModel& model,
                                           const std::vector<Image>& images,
                                           int threads) {
  constexpr std::size_t kBatch = 64;
  std::vector<LikelihoodReport> reports(images.size());
  parallel_chunks(images.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t at = begin; at < end; at += kBatch) {
      const std::size_t stop = std::min(end, at + kBatch);
      std::vector<HaarPyramid<double>> pyramids;
      for (std::size_t i = at; i < stop; ++i) {
        validate_image(model, images[i]);
        pyramids.push_back(build_pyramid(images[i], model.depth()));
      }
      auto batch = model.score(pyramids);
      std::move(batch.begin(), batch.end(), reports.begin() + static_cast<long>(at));
    }
  });
  return reports;
}

Image wf_sample(const WaveletFlowModel& model, std::mt19937_64& rng,
                double temperature) {
  return model.sample(rng, temperature);
}

}  // namespace waveflow
