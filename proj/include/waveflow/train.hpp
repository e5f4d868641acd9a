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

// Maximum-likelihood training with Adam, per-epoch monitoring of the mean
// train-set NLL (unaugmented) and patience-based early stopping that restores
// the best epoch's parameters.

#include "waveflow/augment.hpp"
#include "waveflow/flow.hpp"
#include "waveflow/optim.hpp"
#include "waveflow/wavelet_flow.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace waveflow {

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 32;
  int max_epochs = 20;
  int patience = 10;
  AugmentConfig augmentation;
  bool dequantize = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 0 is the untrained model
  double nll = 0.0;  // mean nats per sample
  double bpd = 0.0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_nll = 0.0;
  bool stopped_early = false;
  bool aborted = false;  // non-finite loss; best parameters were restored
  std::vector<std::string> warnings;
};

// Tracks the best monitored value; stop() once `patience` consecutive epochs
// fail to improve on it.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience);
  // Returns true when value is a new best.
  bool observe(int epoch, double value);
  bool stop() const { return stale_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best_value() const { return best_; }

 private:
  int patience_;
  int stale_ = 0;
  int best_epoch_ = 0;
  double best_ = 0.0;
  bool seen_ = false;
};

// One training example: flattened sample and optional condition.
struct Example {
  Eigen::ArrayXd x;
  Eigen::ArrayXd condition;
};

struct ExampleSet {
  Shape x_shape;          // per sample
  Shape condition_shape;  // empty when unconditional
  std::vector<Example> examples;
};

// Produces one epoch's (possibly augmented) examples.
using EpochSampler = std::function<ExampleSet(std::mt19937_64&)>;

template <class M>
concept TrainableDensity = requires(M m, const M cm, const Tensor& x,
                                    const std::optional<Tensor>& c) {
  { cm.log_prob(x, c) } -> std::same_as<Tensor>;
  { m.initialize(x, c) } -> std::same_as<std::vector<std::string>>;
  { m.parameters() } -> std::same_as<ParameterList>;
  { cm.initialized() } -> std::same_as<bool>;
  { cm.dimension() } -> std::same_as<Index>;
};

struct BatchTensors {
  Tensor x;
  std::optional<Tensor> condition;
};

BatchTensors make_batch(const ExampleSet& set, std::span<const std::size_t> order);

// Mean per-sample log-likelihood (nats) of every example, without a tape.
template <TrainableDensity M>
double mean_log_likelihood(const M& model, const ExampleSet& set, std::size_t chunk = 64) {
  NoGradGuard no_grad;
  double total = 0.0;
  std::vector<std::size_t> order(set.examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t at = 0; at < order.size(); at += chunk) {
    const std::size_t n = std::min(chunk, order.size() - at);
    const BatchTensors b = make_batch(set, std::span(order).subspan(at, n));
    total += model.log_prob(b.x, b.condition).values().sum();
  }
  return total / static_cast<double>(set.examples.size());
}

template <TrainableDensity M>
TrainResult train(M& model, const EpochSampler& sampler, const ExampleSet& monitor,
                  const TrainConfig& config) {
  config.validate();
  if (monitor.examples.empty()) {
    throw std::invalid_argument("train: empty dataset");
  }
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  const double dims = static_cast<double>(model.dimension());
  auto record = [&](int epoch) {
    double nll = std::numeric_limits<double>::quiet_NaN();
    try {
      nll = -mean_log_likelihood(model, monitor);
    } catch (const NumericalError&) {
    }
    const double seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return EpochRecord{epoch, nll, nll / (dims * std::numbers::ln2), seconds};
  };

  TrainResult result;
  result.history.push_back(record(0));
  ParameterList params = model.parameters();
  zero_grad(params);
  auto snapshot = [&] {
    std::vector<Eigen::ArrayXd> values;
    for (Parameter* p : params) values.push_back(p->values());
    return values;
  };
  auto restore = [&](const std::vector<Eigen::ArrayXd>& values) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->mutable_values() = values[i];
  };

  std::vector<Eigen::ArrayXd> best = snapshot();
  if (!model.initialized()) {
    const BatchTensors all = [&] {
      std::vector<std::size_t> order(monitor.examples.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      return make_batch(monitor, order);
    }();
    result.warnings = model.initialize(all.x, all.condition);
  }

  std::mt19937_64 rng(config.seed);
  AdamOptimizer adam(AdamOptions{.learning_rate = config.learning_rate});
  EarlyStopping stopping(config.patience);
  stopping.observe(0, result.history.front().nll);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const ExampleSet data = sampler(rng);
    if (data.examples.empty()) throw std::invalid_argument("train: empty epoch");
    std::vector<std::size_t> order(data.examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    const auto batch = static_cast<std::size_t>(config.batch_size);
    for (std::size_t at = 0; at < order.size(); at += batch) {
      const std::size_t n = std::min(batch, order.size() - at);
      const BatchTensors b = make_batch(data, std::span(order).subspan(at, n));
      std::optional<Tensor> loss;
      try {
        loss = affine(mean(model.log_prob(b.x, b.condition)), -1.0 / dims);
      } catch (const NumericalError&) {
      }
      if (!loss || !std::isfinite(loss->item())) {
        restore(best);
        zero_grad(params);
        result.aborted = true;
        break;
      }
      backward(*loss, params);
      adam.update(params);
    }
    if (result.aborted) break;
    EpochRecord rec = record(epoch);
    if (!std::isfinite(rec.nll)) {
      restore(best);
      result.aborted = true;
      break;
    }
    result.history.push_back(rec);
    if (stopping.observe(epoch, rec.nll)) best = snapshot();
    if (stopping.stop()) {
      result.stopped_early = true;
      break;
    }
  }
  restore(best);
  result.best_epoch = stopping.best_epoch();
  result.best_nll = stopping.best_value();
  return result;
}

// ---- wavelet-flow training --------------------------------------------------

// Per-level example sets drawn from images: level 0 is the base L_0, level i
// its detail coefficients conditioned on the low-pass image.
ExampleSet level_examples(const std::vector<Image>& images, int depth, int level_index);

struct WaveletTrainResult {
  std::map<int, TrainResult> levels;  // 0 = base
};

// Trains one component; every other component's parameters are untouched.
TrainResult train_level(WaveletFlowModel& model, int level_index,
                        const std::vector<Image>& images, const TrainConfig& config);
// Trains the base and every level independently, optionally in parallel.
WaveletTrainResult train_waveletflow(WaveletFlowModel& model,
                                     const std::vector<Image>& images,
                                     const TrainConfig& config, int threads = 1);

// Pixel-space flow on [1, S, S] images.
TrainResult train_glow(FlowModel& model, const std::vector<Image>& images,
                       const TrainConfig& config);

}  // namespace waveflow
