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

#include "waveflow/train.hpp"

#include "waveflow/parallel.hpp"

#include <stdexcept>

namespace waveflow {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be positive");
  if (batch_size < 1) throw std::invalid_argument("train: batch size must be at least 1");
  if (max_epochs < 0) throw std::invalid_argument("train: max epochs must be non-negative");
  if (patience < 1) throw std::invalid_argument("train: patience must be at least 1");
}

EarlyStopping::EarlyStopping(int patience) : patience_(patience) {
  if (patience < 1) throw std::invalid_argument("early stopping: patience must be at least 1");
}

bool EarlyStopping::observe(int epoch, double value) {
  if (!seen_ || value < best_) {
    seen_ = true;
    best_ = value;
    best_epoch_ = epoch;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

BatchTensors make_batch(const ExampleSet& set, std::span<const std::size_t> order) {
  const Index n = static_cast<Index>(order.size());
  const Index dx = shape_size(set.x_shape);
  Eigen::ArrayXd xs(n * dx);
  const bool conditional = !set.condition_shape.empty();
  const Index dc = conditional ? shape_size(set.condition_shape) : 0;
  Eigen::ArrayXd cs(n * dc);
  for (Index i = 0; i < n; ++i) {
    const Example& e = set.examples.at(order[static_cast<std::size_t>(i)]);
    if (e.x.size() != dx || e.condition.size() != dc) {
      throw ShapeError("make_batch: example size does not match the set shape");
    }
    xs.segment(i * dx, dx) = e.x;
    if (conditional) cs.segment(i * dc, dc) = e.condition;
  }
  Shape xshape{n};
  xshape.insert(xshape.end(), set.x_shape.begin(), set.x_shape.end());
  BatchTensors out{Tensor(xshape, std::move(xs)), std::nullopt};
  if (conditional) {
    Shape cshape{n};
    cshape.insert(cshape.end(), set.condition_shape.begin(), set.condition_shape.end());
    out.condition = Tensor(cshape, std::move(cs));
  }
  return out;
}

namespace {

Eigen::ArrayXd flatten(const Image& plane) {
  return Eigen::Map<const Eigen::ArrayXd>(plane.data(), plane.size());
}

Example level_example(const HaarPyramid<double>& pyramid, int level_index) {
  if (level_index == 0) return Example{flatten(pyramid.base), {}};
  const HaarLevel<double>& level = pyramid.level(level_index);
  const Index n = level.low.size();
  Eigen::ArrayXd d(3 * n);
  for (int c = 0; c < 3; ++c) d.segment(c * n, n) = flatten(level.detail[c]);
  return Example{std::move(d), flatten(level.low)};
}

ExampleSet empty_level_set(const HaarPyramid<double>& pyramid, int level_index) {
  ExampleSet set;
  if (level_index == 0) {
    set.x_shape = Shape{1, pyramid.base.rows(), pyramid.base.cols()};
  } else {
    const HaarLevel<double>& level = pyramid.level(level_index);
    set.x_shape = Shape{3, level.low.rows(), level.low.cols()};
    set.condition_shape = Shape{1, level.low.rows(), level.low.cols()};
  }
  return set;
}

ExampleSet level_set(const std::vector<Image>& images, int depth, int level_index,
                     const std::function<Image(const Image&)>& prepare) {
  if (images.empty()) throw std::invalid_argument("train: empty dataset");
  ExampleSet set;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const HaarPyramid<double> pyramid = build_pyramid(prepare(images[i]), depth);
    if (i == 0) set = empty_level_set(pyramid, level_index);
    set.examples.push_back(level_example(pyramid, level_index));
  }
  return set;
}

ExampleSet pixel_set(const std::vector<Image>& images,
                     const std::function<Image(const Image&)>& prepare) {
  if (images.empty()) throw std::invalid_argument("train: empty dataset");
  ExampleSet set;
  set.x_shape = Shape{1, images.front().rows(), images.front().cols()};
  for (const Image& image : images) set.examples.push_back(Example{flatten(prepare(image)), {}});
  return set;
}

Image training_view(const Image& image, std::mt19937_64& rng, const TrainConfig& config) {
  const Image warped = config.augmentation.enabled
                           ? augment(image, rng, config.augmentation)
                           : image;
  return dequantize(warped, rng, config.dequantize);
}

}  // namespace

ExampleSet level_examples(const std::vector<Image>& images, int depth, int level_index) {
  return level_set(images, depth, level_index,
                   [](const Image& image) { return image; });
}

TrainResult train_level(WaveletFlowModel& model, int level_index,
                        const std::vector<Image>& images, const TrainConfig& config) {
  const int depth = model.depth();
  if (level_index < 0 || level_index > depth) {
    throw std::out_of_range("train: no level " + std::to_string(level_index));
  }
  for (const Image& image : images) {
    if (image.rows() != model.image_size() || image.cols() != model.image_size()) {
      throw ShapeError("train: image size does not match the model");
    }
  }
  const bool deq = config.dequantize;
  const ExampleSet monitor = level_set(
      images, depth, level_index,
      [deq](const Image& image) { return dequantize_midpoint(image, deq); });
  const EpochSampler sampler = [&](std::mt19937_64& rng) {
    return level_set(images, depth, level_index,
                     [&](const Image& image) { return training_view(image, rng, config); });
  };
  TrainConfig level_config = config;
  level_config.seed = derive_seed(config.seed, static_cast<std::uint64_t>(level_index));
  if (level_index == 0) {
    return std::visit(
        [&](auto& density) { return train(density, sampler, monitor, level_config); },
        model.base());
  }
  return train(model.level_flow(level_index), sampler, monitor, level_config);
}

WaveletTrainResult train_waveletflow(WaveletFlowModel& model,
                                     const std::vector<Image>& images,
                                     const TrainConfig& config, int threads) {
  const int levels = model.depth() + 1;
  std::vector<TrainResult> results(static_cast<std::size_t>(levels));
  parallel_chunks(static_cast<std::size_t>(levels), threads,
                  [&](std::size_t begin, std::size_t end) {
                    for (std::size_t i = begin; i < end; ++i) {
                      results[i] = train_level(model, static_cast<int>(i), images, config);
                    }
                  });
  WaveletTrainResult out;
  for (int i = 0; i < levels; ++i) out.levels[i] = std::move(results[static_cast<std::size_t>(i)]);
  return out;
}

TrainResult train_glow(FlowModel& model, const std::vector<Image>& images,
                       const TrainConfig& config) {
  const bool deq = config.dequantize;
  const ExampleSet monitor =
      pixel_set(images, [deq](const Image& image) { return dequantize_midpoint(image, deq); });
  if (monitor.x_shape != model.config().input_shape) {
    throw ShapeError("train: image shape " + shape_string(monitor.x_shape) +
                     " does not match the flow input " +
                     shape_string(model.config().input_shape));
  }
  const EpochSampler sampler = [&](std::mt19937_64& rng) {
    return pixel_set(images,
                     [&](const Image& image) { return training_view(image, rng, config); });
  };
  return train(model, sampler, monitor, config);
}

}  // namespace waveflow
