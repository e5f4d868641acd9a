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

// Minimal reverse-mode differentiable tensor engine. Values live in a flat
// Eigen::ArrayXd in row-major (N, C, H, W) order. Every op records a closure
// on a tape node when any input requires a gradient; backward() replays the
// tape in reverse topological order.

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace waveflow {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

Index shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct Node {
  Eigen::ArrayXd value;
  Shape shape;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Accumulates d(loss)/d(parent_i) into parent_grads[i] (nullptr when that
  // parent needs no gradient).
  std::function<void(const Eigen::ArrayXd& grad,
                     std::span<Eigen::ArrayXd*> parent_grads)>
      backward;
};

}  // namespace detail

class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, Eigen::ArrayXd values);

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, double value);
  static Tensor scalar(double value);

  const Shape& shape() const { return node_->shape; }
  Index dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t rank() const { return node_->shape.size(); }
  Index size() const { return node_->value.size(); }
  const Eigen::ArrayXd& values() const { return node_->value; }
  double item() const;
  bool requires_grad() const { return node_->requires_grad; }

  // Same values, cut from the tape.
  Tensor detach() const;
  Tensor reshaped(Shape shape) const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  static Tensor from_node(std::shared_ptr<detail::Node> node);

 private:
  std::shared_ptr<detail::Node> node_;
};

// A trainable leaf. Copies are deep: a copied Parameter owns fresh storage
// and never shares tape nodes with its source.
class Parameter {
 public:
  Parameter(std::string id, Shape shape, Eigen::ArrayXd init);
  Parameter(const Parameter& other);
  Parameter& operator=(const Parameter& other);
  Parameter(Parameter&&) noexcept = default;
  Parameter& operator=(Parameter&&) noexcept = default;

  const std::string& id() const { return id_; }
  const Tensor& tensor() const { return tensor_; }
  const Shape& shape() const { return tensor_.shape(); }
  Index size() const { return tensor_.size(); }

  const Eigen::ArrayXd& values() const { return tensor_.values(); }
  Eigen::ArrayXd& mutable_values() { return tensor_.node()->value; }
  const Eigen::ArrayXd& gradient() const { return gradient_; }
  Eigen::ArrayXd& mutable_gradient() { return gradient_; }
  void zero_grad() { gradient_.setZero(); }

 private:
  std::string id_;
  Tensor tensor_;
  Eigen::ArrayXd gradient_;
};

using ParameterList = std::vector<Parameter*>;

// While alive, ops on this thread record no tape (read-only evaluation).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

  static bool grad_enabled();

 private:
  bool previous_;
};

// Accumulates d(loss)/d(param) into every listed parameter's gradient.
// Throws std::invalid_argument unless loss holds exactly one value.
void backward(const Tensor& loss, std::span<Parameter* const> params);

// ---- elementwise ------------------------------------------------------------
// Binary ops take equal shapes, or a one-element operand broadcast as scalar.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

// Inputs are clamped to [-kExpClamp, kExpClamp]; the clamped region has zero
// gradient.
inline constexpr double kExpClamp = 60.0;
Tensor exp(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor square(const Tensor& a);
// scale * a + shift with constant coefficients.
Tensor affine(const Tensor& a, double scale, double shift = 0.0);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double s, const Tensor& a) { return affine(a, s); }

// ---- reductions -------------------------------------------------------------

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Reduces every axis but the first: [N, ...] -> [N].
Tensor sum_per_sample(const Tensor& a);

// ---- structural -------------------------------------------------------------

// out[i] = a[indices[i]]. Backward scatter-adds.
Tensor gather(const Tensor& a, std::vector<Index> indices, Shape shape);
// Channel-axis concatenation of [N, Ca, H, W] and [N, Cb, H, W].
Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor slice_channels(const Tensor& a, Index begin, Index count);

// ---- layers -----------------------------------------------------------------

// 3x3 "same" cross-correlation. input [N, C, H, W] or [C, H, W];
// weights [C', C, 3, 3]; bias [C'].
Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias);
Tensor conv2d(const Tensor& input, const Parameter& weights,
              const Parameter& bias);

// Per-channel (x - offset_c) * exp(log_scale_c) on [N, C, H, W].
Tensor channel_affine(const Tensor& x, const Tensor& offset,
                      const Tensor& log_scale);

}  // namespace waveflow
