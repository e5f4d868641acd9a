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

#include "waveflow/flow.hpp"

#include <cmath>
#include <numbers>
#include <type_traits>

namespace waveflow {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

Eigen::ArrayXd random_normal(Index n, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  Eigen::ArrayXd out(n);
  for (Index i = 0; i < n; ++i) out(i) = normal(rng);
  return out;
}

Tensor tile(const Eigen::ArrayXd& pattern, const Shape& chw, Index batch) {
  Eigen::ArrayXd values(batch * pattern.size());
  for (Index n = 0; n < batch; ++n) {
    values.segment(n * pattern.size(), pattern.size()) = pattern;
  }
  return Tensor(Shape{batch, chw[0], chw[1], chw[2]}, std::move(values));
}

Tensor latent_log_density(const Tensor& z) {
  const double per = static_cast<double>(z.size() / z.dim(0));
  return affine(sum_per_sample(square(z)), -0.5, -per * kHalfLog2Pi);
}

void check_finite(const FlowState& state, int index) {
  if (!state.x.values().allFinite() || !state.logdet.values().allFinite()) {
    throw NumericalError(
        "non-finite value after bijector " + std::to_string(index), index);
  }
}

void check_condition(const Tensor& x, const std::optional<Tensor>& condition,
                     Index channels) {
  if (channels == 0) {
    if (condition) {
      throw ShapeError("coupling: unexpected condition for unconditional layer");
    }
    return;
  }
  if (!condition) throw ShapeError("coupling: missing condition tensor");
  const Tensor& c = *condition;
  if (c.rank() != 4 || c.dim(0) != x.dim(0) || c.dim(1) != channels ||
      c.dim(2) != x.dim(2) || c.dim(3) != x.dim(3)) {
    throw ShapeError("coupling: condition shape " + shape_string(c.shape()) +
                     " does not match [" + std::to_string(x.dim(0)) + "," +
                     std::to_string(channels) + "," + std::to_string(x.dim(2)) +
                     "," + std::to_string(x.dim(3)) + "]");
  }
}

}  // namespace

LogDensity LogDensity::from_log_likelihood(double log_likelihood, Index dims) {
  return {log_likelihood,
          -log_likelihood / (static_cast<double>(dims) * std::numbers::ln2)};
}

double standard_normal_log_density(const Eigen::ArrayXd& z) {
  return -0.5 * z.square().sum() - static_cast<double>(z.size()) * kHalfLog2Pi;
}

Tensor as_batch(const Tensor& t, const Shape& sample_shape) {
  if (t.shape() == sample_shape) {
    Shape batched{1};
    batched.insert(batched.end(), sample_shape.begin(), sample_shape.end());
    return t.reshaped(batched);
  }
  if (t.rank() != sample_shape.size() + 1 ||
      !std::equal(sample_shape.begin(), sample_shape.end(),
                  t.shape().begin() + 1)) {
    throw ShapeError("expected " + shape_string(sample_shape) +
                     " samples, got " + shape_string(t.shape()));
  }
  return t;
}

// ---- ActNorm ----------------------------------------------------------------

ActNorm::ActNorm(const std::string& prefix, Index channels)
    : offset(prefix + ".offset", Shape{channels}, Eigen::ArrayXd::Zero(channels)),
      log_scale(prefix + ".log_scale", Shape{channels},
                Eigen::ArrayXd::Zero(channels)) {}

void ActNorm::forward(FlowState& state) const {
  const double plane = static_cast<double>(state.x.dim(2) * state.x.dim(3));
  state.x = channel_affine(state.x, offset.tensor(), log_scale.tensor());
  state.logdet = state.logdet + affine(sum(log_scale.tensor()), plane);
}

void ActNorm::inverse(FlowState& state) const {
  const double plane = static_cast<double>(state.x.dim(2) * state.x.dim(3));
  const Eigen::ArrayXd& ls = log_scale.values();
  Tensor neg_scale(Shape{ls.size()}, -ls);
  Tensor shifted(Shape{ls.size()}, -offset.values() * ls.exp());
  state.x = channel_affine(state.x, shifted, neg_scale);
  state.logdet = state.logdet - Tensor::scalar(plane * ls.sum());
}

std::vector<std::string> ActNorm::initialize(const Tensor& x) {
  std::vector<std::string> warnings;
  const Index batch = x.dim(0);
  const Index channels = x.dim(1);
  const Index plane = x.dim(2) * x.dim(3);
  for (Index c = 0; c < channels; ++c) {
    Eigen::ArrayXd values(batch * plane);
    for (Index n = 0; n < batch; ++n) {
      values.segment(n * plane, plane) =
          x.values().segment((n * channels + c) * plane, plane);
    }
    const double mu = values.mean();
    const double sd = std::sqrt((values - mu).square().mean());
    offset.mutable_values()(c) = mu;
    if (sd < 1e-8) {
      log_scale.mutable_values()(c) = 0.0;
      warnings.push_back(offset.id() + ": zero variance in channel " +
                         std::to_string(c) + ", scale clamped to 1");
    } else {
      log_scale.mutable_values()(c) = -std::log(sd);
    }
  }
  return warnings;
}

// ---- AffineCoupling ---------------------------------------------------------

AffineCoupling::AffineCoupling(const std::string& prefix, Mask mask_in,
                               Index conditioning, Index hidden_width,
                               std::mt19937_64& rng)
    : mask(std::move(mask_in)),
      conditioning_channels(conditioning),
      hidden(hidden_width),
      w1(prefix + ".w1", Shape{hidden_width, mask.shape[0] + conditioning, 3, 3},
         random_normal(hidden_width * (mask.shape[0] + conditioning) * 9,
                       1.0 / std::sqrt(9.0 * static_cast<double>(
                                                 mask.shape[0] + conditioning)),
                       rng)),
      b1(prefix + ".b1", Shape{hidden_width}, Eigen::ArrayXd::Zero(hidden_width)),
      w2(prefix + ".w2", Shape{hidden_width, hidden_width, 3, 3},
         random_normal(hidden_width * hidden_width * 9,
                       1.0 / std::sqrt(9.0 * static_cast<double>(hidden_width)),
                       rng)),
      b2(prefix + ".b2", Shape{hidden_width}, Eigen::ArrayXd::Zero(hidden_width)),
      w3(prefix + ".w3", Shape{2 * mask.shape[0], hidden_width, 3, 3},
         Eigen::ArrayXd::Zero(2 * mask.shape[0] * hidden_width * 9)),
      b3(prefix + ".b3", Shape{2 * mask.shape[0]},
         Eigen::ArrayXd::Zero(2 * mask.shape[0])) {}

std::pair<Tensor, Tensor> AffineCoupling::scale_shift(
    const Tensor& input, const std::optional<Tensor>& condition) const {
  if (input.rank() != 4 || input.dim(1) != mask.shape[0] ||
      input.dim(2) != mask.shape[1] || input.dim(3) != mask.shape[2]) {
    throw ShapeError("coupling: input " + shape_string(input.shape()) +
                     " does not match mask " + shape_string(mask.shape));
  }
  check_condition(input, condition, conditioning_channels);
  const Index batch = input.dim(0);
  const Index channels = mask.shape[0];
  const Tensor pass = tile(mask.pass, mask.shape, batch);
  const Tensor keep = tile(1.0 - mask.pass, mask.shape, batch);

  Tensor u = input * pass;
  if (condition) u = concat_channels(u, *condition);
  Tensor h = relu(conv2d(u, w1, b1));
  h = relu(conv2d(h, w2, b2));
  const Tensor out = conv2d(h, w3, b3);
  Tensor s = affine(tanh(slice_channels(out, 0, channels)), kCouplingScaleBound);
  Tensor t = slice_channels(out, channels, channels);
  return {s * keep, t * keep};
}

void AffineCoupling::forward(FlowState& state) const {
  auto [s, t] = scale_shift(state.x, state.condition);
  state.x = (state.x + t) * exp(s);
  state.logdet = state.logdet + sum_per_sample(s);
}

void AffineCoupling::inverse(FlowState& state) const {
  // The pass set is unchanged by the forward map, so s and t are recomputable.
  auto [s, t] = scale_shift(state.x, state.condition);
  state.x = state.x * exp(affine(s, -1.0)) - t;
  state.logdet = state.logdet - sum_per_sample(s);
}

Index AffineCoupling::parameter_count() const {
  return w1.size() + b1.size() + w2.size() + b2.size() + w3.size() + b3.size();
}

// ---- structural bijectors ---------------------------------------------------

void ChannelReverse::forward(FlowState& state) const {
  const Tensor& x = state.x;
  const Index batch = x.dim(0);
  const Index c = x.dim(1);
  const Index plane = x.dim(2) * x.dim(3);
  std::vector<Index> idx(static_cast<std::size_t>(x.size()));
  for (Index n = 0; n < batch; ++n) {
    for (Index k = 0; k < c; ++k) {
      for (Index p = 0; p < plane; ++p) {
        idx[static_cast<std::size_t>((n * c + k) * plane + p)] =
            (n * c + (c - 1 - k)) * plane + p;
      }
    }
  }
  state.x = gather(x, std::move(idx), x.shape());
}

void ChannelReverse::inverse(FlowState& state) const { forward(state); }

Tensor squeeze2x2(const Tensor& x) {
  if (x.rank() != 4 || x.dim(2) % 2 != 0 || x.dim(3) % 2 != 0) {
    throw ShapeError("squeeze: needs [N,C,H,W] with even H and W, got " +
                     shape_string(x.shape()));
  }
  const Index batch = x.dim(0), c = x.dim(1), h = x.dim(2) / 2,
              w = x.dim(3) / 2;
  std::vector<Index> idx;
  idx.reserve(static_cast<std::size_t>(x.size()));
  for (Index n = 0; n < batch; ++n) {
    for (Index k = 0; k < c; ++k) {
      for (Index sub = 0; sub < 4; ++sub) {
        const Index dy = sub / 2, dx = sub % 2;
        for (Index i = 0; i < h; ++i) {
          for (Index j = 0; j < w; ++j) {
            idx.push_back(((n * c + k) * 2 * h + 2 * i + dy) * 2 * w + 2 * j + dx);
          }
        }
      }
    }
  }
  return gather(x, std::move(idx), Shape{batch, 4 * c, h, w});
}

Tensor unsqueeze2x2(const Tensor& x) {
  if (x.rank() != 4 || x.dim(1) % 4 != 0) {
    throw ShapeError("unsqueeze: needs [N,4C,H,W], got " +
                     shape_string(x.shape()));
  }
  const Index batch = x.dim(0), c = x.dim(1) / 4, h = x.dim(2), w = x.dim(3);
  std::vector<Index> idx(static_cast<std::size_t>(x.size()));
  for (Index n = 0; n < batch; ++n) {
    for (Index k = 0; k < c; ++k) {
      for (Index y = 0; y < 2 * h; ++y) {
        for (Index xx = 0; xx < 2 * w; ++xx) {
          const Index sub = (y % 2) * 2 + xx % 2;
          const Index src = ((n * 4 * c + 4 * k + sub) * h + y / 2) * w + xx / 2;
          idx[static_cast<std::size_t>(((n * c + k) * 2 * h + y) * 2 * w + xx)] =
              src;
        }
      }
    }
  }
  return gather(x, std::move(idx), Shape{batch, c, 2 * h, 2 * w});
}

void Squeeze::forward(FlowState& state) const {
  state.x = squeeze2x2(state.x);
  if (state.condition) state.condition = squeeze2x2(*state.condition);
}

void Squeeze::inverse(FlowState& state) const {
  state.x = unsqueeze2x2(state.x);
  if (state.condition) state.condition = unsqueeze2x2(*state.condition);
}

void Split::forward(FlowState& state) const {
  const Index c = state.x.dim(1);
  if (c % 2 != 0) {
    throw ShapeError("split: odd channel count " + std::to_string(c));
  }
  state.factored.push_back(slice_channels(state.x, c / 2, c / 2));
  state.x = slice_channels(state.x, 0, c / 2);
}

void Split::inverse(FlowState& state) const {
  if (state.factored.empty()) {
    throw std::logic_error("split inverse: no factored latent left");
  }
  state.x = concat_channels(state.x, state.factored.back());
  state.factored.pop_back();
}

// ---- FlowModel --------------------------------------------------------------

FlowModel::FlowModel(GlowConfig config) : config_(std::move(config)) {
  if (config_.steps < 1 || config_.scales < 1) {
    throw std::invalid_argument("build_glow: K and L must be >= 1");
  }
  if (config_.input_shape.size() != 3) {
    throw ShapeError("build_glow: input shape must be [C,H,W]");
  }
  if (config_.hidden < 1) {
    throw std::invalid_argument("build_glow: hidden width must be >= 1");
  }
  std::mt19937_64 rng(config_.seed);
  Index c = config_.input_shape[0];
  Index h = config_.input_shape[1];
  Index w = config_.input_shape[2];
  Index cc = config_.conditioning_channels;
  // Alternating channel halves already swap roles each step; a reversal on
  // top would cancel the alternation.
  const bool permute = config_.mask != MaskStrategy::kChannelHalf;
  int step_index = 0;
  for (int scale = 0; scale < config_.scales; ++scale) {
    if (config_.scales > 1) {
      if (h % 2 != 0 || w % 2 != 0) {
        throw std::invalid_argument(
            "build_glow: spatial size " +
            std::to_string(config_.input_shape[1]) + "x" +
            std::to_string(config_.input_shape[2]) + " too small to squeeze " +
            std::to_string(config_.scales) + " times");
      }
      bijectors_.emplace_back(Squeeze{});
      c *= 4;
      h /= 2;
      w /= 2;
      cc *= 4;
    }
    for (int k = 0; k < config_.steps; ++k) {
      const std::string prefix = config_.prefix + "s" + std::to_string(scale) +
                                 ".k" + std::to_string(k);
      bijectors_.emplace_back(ActNorm(prefix + ".actnorm", c));
      if (permute) bijectors_.emplace_back(ChannelReverse{c});
      bijectors_.emplace_back(
          AffineCoupling(prefix + ".coupling",
                         make_mask(config_.mask, step_index++, Shape{c, h, w}),
                         cc, config_.hidden, rng));
    }
    if (scale + 1 < config_.scales) {
      if (c % 2 != 0) {
        throw std::invalid_argument("build_glow: cannot split odd channels");
      }
      bijectors_.emplace_back(Split{});
      latent_shapes_.push_back(Shape{c / 2, h, w});
      c /= 2;
    }
  }
  latent_shapes_.push_back(Shape{c, h, w});
}

FlowModel build_glow(const GlowConfig& config) { return FlowModel(config); }

FlowState FlowModel::start(const Tensor& x,
                           const std::optional<Tensor>& condition) const {
  FlowState state;
  state.x = as_batch(x, config_.input_shape);
  if (condition) {
    const Shape cshape{config_.conditioning_channels, config_.input_shape[1],
                       config_.input_shape[2]};
    state.condition = as_batch(*condition, cshape);
    if (state.condition->dim(0) != state.x.dim(0)) {
      throw ShapeError("condition batch does not match input batch");
    }
  } else if (config_.conditioning_channels > 0) {
    throw ShapeError("flow: missing condition tensor");
  }
  state.logdet = Tensor::zeros(Shape{state.x.dim(0)});
  return state;
}

FlowOutput FlowModel::forward(const Tensor& x,
                              const std::optional<Tensor>& condition) const {
  FlowState state = start(x, condition);
  int index = 0;
  for (const Bijector& b : bijectors_) {
    std::visit([&](const auto& layer) { layer.forward(state); }, b);
    check_finite(state, index++);
  }
  Tensor log_prob = state.logdet + latent_log_density(state.x);
  for (const Tensor& f : state.factored) {
    log_prob = log_prob + latent_log_density(f);
  }
  return {state.x, std::move(state.factored), state.logdet, log_prob};
}

Tensor FlowModel::log_prob(const Tensor& x,
                           const std::optional<Tensor>& condition) const {
  return forward(x, condition).log_prob;
}

Tensor FlowModel::inverse(const std::vector<Tensor>& latents,
                          const std::optional<Tensor>& condition) const {
  return generate(latents, condition).first;
}

std::pair<Tensor, Tensor> FlowModel::generate(
    const std::vector<Tensor>& latents,
    const std::optional<Tensor>& condition) const {
  if (latents.size() != latent_shapes_.size()) {
    throw ShapeError("flow inverse: expected " +
                     std::to_string(latent_shapes_.size()) + " latents");
  }
  FlowState state;
  state.x = as_batch(latents.back(), latent_shapes_.back());
  for (std::size_t i = 0; i + 1 < latents.size(); ++i) {
    state.factored.push_back(as_batch(latents[i], latent_shapes_[i]));
  }
  if (condition) {
    const Shape cshape{config_.conditioning_channels, config_.input_shape[1],
                       config_.input_shape[2]};
    Tensor cond = as_batch(*condition, cshape);
    for (const Bijector& b : bijectors_) {
      if (std::holds_alternative<Squeeze>(b)) cond = squeeze2x2(cond);
    }
    state.condition = cond;
  } else if (config_.conditioning_channels > 0) {
    throw ShapeError("flow: missing condition tensor");
  }
  state.logdet = Tensor::zeros(Shape{state.x.dim(0)});
  for (auto it = bijectors_.rbegin(); it != bijectors_.rend(); ++it) {
    std::visit([&](const auto& layer) { layer.inverse(state); }, *it);
  }
  return {state.x, state.logdet};
}

Tensor FlowModel::sample(std::mt19937_64& rng, double temperature, Index count,
                         const std::optional<Tensor>& condition) const {
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("sample: temperature must be positive");
  }
  std::vector<Tensor> latents;
  for (const Shape& s : latent_shapes_) {
    Shape batched{count};
    batched.insert(batched.end(), s.begin(), s.end());
    latents.emplace_back(batched,
                         random_normal(shape_size(batched), temperature, rng));
  }
  return inverse(latents, condition);
}

std::vector<std::string> FlowModel::initialize(
    const Tensor& x, const std::optional<Tensor>& condition) {
  std::vector<std::string> warnings;
  FlowState state = start(x.detach(), condition);
  for (Bijector& b : bijectors_) {
    if (auto* norm = std::get_if<ActNorm>(&b)) {
      auto w = norm->initialize(state.x);
      warnings.insert(warnings.end(), w.begin(), w.end());
    }
    std::visit([&](const auto& layer) { layer.forward(state); }, b);
  }
  initialized_ = true;
  return warnings;
}

ParameterList FlowModel::parameters() {
  ParameterList out;
  for (Bijector& b : bijectors_) {
    std::visit(Overloaded{
                   [&](ActNorm& a) {
                     out.push_back(&a.offset);
                     out.push_back(&a.log_scale);
                   },
                   [&](AffineCoupling& c) {
                     for (Parameter* p : {&c.w1, &c.b1, &c.w2, &c.b2, &c.w3, &c.b3}) {
                       out.push_back(p);
                     }
                   },
                   [](auto&) {},
               },
               b);
  }
  return out;
}

std::vector<const Parameter*> FlowModel::parameters() const {
  auto mutable_list = const_cast<FlowModel*>(this)->parameters();
  return {mutable_list.begin(), mutable_list.end()};
}

Index FlowModel::parameter_count() const {
  Index n = 0;
  for (const Parameter* p : parameters()) n += p->size();
  return n;
}

Index FlowModel::coupling_parameter_count() const {
  Index n = 0;
  for (const Bijector& b : bijectors_) {
    if (const auto* c = std::get_if<AffineCoupling>(&b)) n += c->parameter_count();
  }
  return n;
}

// ---- free functions ---------------------------------------------------------

std::vector<LogDensity> flow_log_likelihoods(
    const FlowModel& model, const Tensor& x,
    const std::optional<Tensor>& condition) {
  const Tensor lp = model.log_prob(x.detach(),
                                   condition ? std::optional(condition->detach())
                                             : std::nullopt);
  std::vector<LogDensity> out;
  out.reserve(static_cast<std::size_t>(lp.size()));
  for (Index i = 0; i < lp.size(); ++i) {
    out.push_back(LogDensity::from_log_likelihood(lp.values()(i), model.dimension()));
  }
  return out;
}

LogDensity flow_log_likelihood(const FlowModel& model, const Tensor& x,
                               const std::optional<Tensor>& condition) {
  auto all = flow_log_likelihoods(model, x, condition);
  if (all.size() != 1) {
    throw ShapeError("flow_log_likelihood: expected a single sample");
  }
  return all.front();
}

Tensor flow_sample(const FlowModel& model, std::mt19937_64& rng,
                   double temperature, const std::optional<Tensor>& condition) {
  return model.sample(rng, temperature, 1, condition).reshaped(
      model.config().input_shape);
}

}  // namespace waveflow
