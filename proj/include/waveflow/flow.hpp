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

// Glow-style exact-likelihood flows. The normalizing direction maps data x to
// latents z; each bijector contributes log|det dz/dx| and
//
//   log p(x) = log N(z; 0, I) + sum of normalizing-direction logdets.

#include "waveflow/mask.hpp"
#include "waveflow/tensor.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace waveflow {

class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, int bijector_index)
      : std::runtime_error(what), bijector_index_(bijector_index) {}
  int bijector_index() const { return bijector_index_; }

 private:
  int bijector_index_;
};

struct LogDensity {
  double log_likelihood = 0.0;  // nats
  double bits_per_dim = 0.0;

  static LogDensity from_log_likelihood(double log_likelihood, Index dims);
};

// The coupling s output is 2 tanh(raw), so e^s stays within [e^-2, e^2].
inline constexpr double kCouplingScaleBound = 2.0;

double standard_normal_log_density(const Eigen::ArrayXd& z);

// Mutable state threaded through a bijector stack. logdet is per sample [N].
struct FlowState {
  Tensor x;
  std::optional<Tensor> condition;
  Tensor logdet;
  std::vector<Tensor> factored;
};

class ActNorm {
 public:
  ActNorm(const std::string& prefix, Index channels);

  void forward(FlowState& state) const;
  void inverse(FlowState& state) const;
  // Per-channel zero mean, unit variance on x; returns warnings for
  // zero-variance channels, whose scale stays 1.
  std::vector<std::string> initialize(const Tensor& x);

  Parameter offset;
  Parameter log_scale;
};

class AffineCoupling {
 public:
  AffineCoupling(const std::string& prefix, Mask mask,
                 Index conditioning_channels, Index hidden,
                 std::mt19937_64& rng);

  void forward(FlowState& state) const;
  void inverse(FlowState& state) const;

  // Raw network output split into bounded s and t, both zero on the pass set.
  std::pair<Tensor, Tensor> scale_shift(const Tensor& input,
                                        const std::optional<Tensor>& condition)
      const;

  Index parameter_count() const;

  Mask mask;
  Index conditioning_channels;
  Index hidden;
  Parameter w1, b1, w2, b2, w3, b3;
};

// Fixed channel reversal standing in for a learned 1x1 convolution.
struct ChannelReverse {
  Index channels = 1;
  void forward(FlowState& state) const;
  void inverse(FlowState& state) const;
};

struct Squeeze {
  void forward(FlowState& state) const;
  void inverse(FlowState& state) const;
};

// Keeps the first half of the channels; the second half is factored out.
struct Split {
  void forward(FlowState& state) const;
  void inverse(FlowState& state) const;
};

using Bijector =
    std::variant<ActNorm, ChannelReverse, AffineCoupling, Squeeze, Split>;

Tensor squeeze2x2(const Tensor& x);
Tensor unsqueeze2x2(const Tensor& x);

struct GlowConfig {
  int steps = 32;   // K
  int scales = 3;   // L
  Shape input_shape{1, 32, 32};
  Index conditioning_channels = 0;
  MaskStrategy mask = MaskStrategy::kChannelHalf;
  Index hidden = 256;
  std::uint64_t seed = 0;
  std::string prefix;
};

struct FlowOutput {
  Tensor z;
  std::vector<Tensor> factored;
  Tensor logdet;    // [N]
  Tensor log_prob;  // [N]
};

class FlowModel {
 public:
  explicit FlowModel(GlowConfig config);

  const GlowConfig& config() const { return config_; }
  const std::vector<Bijector>& bijectors() const { return bijectors_; }
  std::vector<Bijector>& bijectors() { return bijectors_; }
  // Shapes of the factored latents in order, then the final latent.
  const std::vector<Shape>& latent_shapes() const { return latent_shapes_; }
  Index dimension() const { return shape_size(config_.input_shape); }

  // x is [N, C, H, W] (or [C, H, W] for one sample); condition likewise.
  FlowOutput forward(const Tensor& x,
                     const std::optional<Tensor>& condition = {}) const;
  Tensor log_prob(const Tensor& x,
                  const std::optional<Tensor>& condition = {}) const;
  // latents ordered like latent_shapes(), each batched [N, ...].
  Tensor inverse(const std::vector<Tensor>& latents,
                 const std::optional<Tensor>& condition = {}) const;
  // Generative pass that also returns the generative-direction logdet [N].
  std::pair<Tensor, Tensor> generate(const std::vector<Tensor>& latents,
                                     const std::optional<Tensor>& condition = {})
      const;
  Tensor sample(std::mt19937_64& rng, double temperature, Index count,
                const std::optional<Tensor>& condition = {}) const;

  // Runs the stack once, initializing every actnorm from the batch it sees.
  std::vector<std::string> initialize(const Tensor& x,
                                      const std::optional<Tensor>& condition = {});
  bool initialized() const { return initialized_; }
  void set_initialized(bool value) { initialized_ = value; }

  ParameterList parameters();
  std::vector<const Parameter*> parameters() const;
  Index parameter_count() const;
  Index coupling_parameter_count() const;

 private:
  FlowState start(const Tensor& x, const std::optional<Tensor>& condition) const;

  GlowConfig config_;
  std::vector<Bijector> bijectors_;
  std::vector<Shape> latent_shapes_;
  bool initialized_ = false;
};

// L repetitions of [squeeze (L > 1 only), K x (actnorm, reverse, coupling),
// split (all but the last scale)].
FlowModel build_glow(const GlowConfig& config);

LogDensity flow_log_likelihood(const FlowModel& model, const Tensor& x,
                               const std::optional<Tensor>& condition = {});
std::vector<LogDensity> flow_log_likelihoods(
    const FlowModel& model, const Tensor& x,
    const std::optional<Tensor>& condition = {});
Tensor flow_sample(const FlowModel& model, std::mt19937_64& rng,
                   double temperature,
                   const std::optional<Tensor>& condition = {});

// Adds a leading batch axis to a [C, H, W] tensor when it lacks one.
Tensor as_batch(const Tensor& t, const Shape& sample_shape);

}  // namespace waveflow
