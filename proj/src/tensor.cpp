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

#include "waveflow/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace waveflow {

namespace {

thread_local bool t_grad_enabled = true;

using detail::Node;
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using BackwardFn = std::function<void(const Eigen::ArrayXd&,
                                      std::span<Eigen::ArrayXd*>)>;

Tensor make_result(Shape shape, Eigen::ArrayXd value,
                   std::vector<std::shared_ptr<Node>> parents,
                   BackwardFn backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->shape = std::move(shape);
  node->requires_grad =
      t_grad_enabled && std::any_of(parents.begin(), parents.end(),
                                    [](const auto& p) { return p->requires_grad; });
  if (node->requires_grad) {
    node->parents = std::move(parents);
    node->backward = std::move(backward_fn);
  }
  return Tensor::from_node(std::move(node));
}

enum class Broadcast { kNone, kScalarA, kScalarB };

Broadcast check_binary(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::kNone;
  if (a.size() == 1) return Broadcast::kScalarA;
  if (b.size() == 1) return Broadcast::kScalarB;
  throw ShapeError(std::string(op) + ": shape mismatch " +
                   shape_string(a.shape()) + " vs " + shape_string(b.shape()));
}

// Returns the broadcast operand as a full-size array.
Eigen::ArrayXd expand(const Tensor& t, Index n) {
  if (t.size() == n) return t.values();
  return Eigen::ArrayXd::Constant(n, t.values()(0));
}

void accumulate(Eigen::ArrayXd* sink, const Eigen::ArrayXd& grad) {
  if (sink == nullptr) return;
  if (sink->size() == grad.size()) {
    *sink += grad;
  } else {
    (*sink)(0) += grad.sum();
  }
}

struct ConvGeometry {
  Index batch, in_channels, out_channels, height, width;
  bool batched;
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& weights,
                           const Tensor& bias) {
  ConvGeometry g{};
  if (input.rank() == 3) {
    g.batched = false;
    g.batch = 1;
    g.in_channels = input.dim(0);
    g.height = input.dim(1);
    g.width = input.dim(2);
  } else if (input.rank() == 4) {
    g.batched = true;
    g.batch = input.dim(0);
    g.in_channels = input.dim(1);
    g.height = input.dim(2);
    g.width = input.dim(3);
  } else {
    throw ShapeError("conv2d: input must be [C,H,W] or [N,C,H,W], got " +
                     shape_string(input.shape()));
  }
  if (weights.rank() != 4 || weights.dim(2) != 3 || weights.dim(3) != 3) {
    throw ShapeError("conv2d: weights must be [C',C,3,3], got " +
                     shape_string(weights.shape()));
  }
  if (weights.dim(1) != g.in_channels) {
    throw ShapeError("conv2d: input has " + std::to_string(g.in_channels) +
                     " channels but kernel expects " +
                     std::to_string(weights.dim(1)));
  }
  g.out_channels = weights.dim(0);
  if (bias.size() != g.out_channels) {
    throw ShapeError("conv2d: bias size " + std::to_string(bias.size()) +
                     " does not match " + std::to_string(g.out_channels) +
                     " output channels");
  }
  return g;
}

// Unfolds one [C, H, W] image into a (C*9, H*W) patch matrix.
void im2col(const double* image, const ConvGeometry& g, RowMatrix& cols) {
  const Index hw = g.height * g.width;
  cols.resize(g.in_channels * 9, hw);
  for (Index c = 0; c < g.in_channels; ++c) {
    const double* plane = image + c * hw;
    for (Index ky = 0; ky < 3; ++ky) {
      for (Index kx = 0; kx < 3; ++kx) {
        double* row = cols.row(c * 9 + ky * 3 + kx).data();
        for (Index y = 0; y < g.height; ++y) {
          const Index sy = y + ky - 1;
          for (Index x = 0; x < g.width; ++x) {
            const Index sx = x + kx - 1;
            row[y * g.width + x] =
                (sy >= 0 && sy < g.height && sx >= 0 && sx < g.width)
                    ? plane[sy * g.width + sx]
                    : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const RowMatrix& cols, const ConvGeometry& g, double* image) {
  const Index hw = g.height * g.width;
  for (Index c = 0; c < g.in_channels; ++c) {
    double* plane = image + c * hw;
    for (Index ky = 0; ky < 3; ++ky) {
      for (Index kx = 0; kx < 3; ++kx) {
        const double* row = cols.row(c * 9 + ky * 3 + kx).data();
        for (Index y = 0; y < g.height; ++y) {
          const Index sy = y + ky - 1;
          if (sy < 0 || sy >= g.height) continue;
          for (Index x = 0; x < g.width; ++x) {
            const Index sx = x + kx - 1;
            if (sx < 0 || sx >= g.width) continue;
            plane[sy * g.width + sx] += row[y * g.width + x];
          }
        }
      }
    }
  }
}

}  // namespace

Index shape_size(const Shape& shape) {
  Index n = 1;
  for (Index e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool NoGradGuard::grad_enabled() { return t_grad_enabled; }

// ---- Tensor -----------------------------------------------------------------

Tensor::Tensor() : Tensor(Shape{0}, Eigen::ArrayXd()) {}

Tensor::Tensor(Shape shape, Eigen::ArrayXd values)
    : node_(std::make_shared<Node>()) {
  for (Index e : shape) {
    if (e < 0) throw ShapeError("negative extent in " + shape_string(shape));
  }
  if (shape_size(shape) != values.size()) {
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match shape " + shape_string(shape));
  }
  node_->shape = std::move(shape);
  node_->value = std::move(values);
}

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
  const Index n = shape_size(shape);
  return Tensor(std::move(shape), Eigen::ArrayXd::Constant(n, value));
}

Tensor Tensor::scalar(double value) { return filled(Shape{1}, value); }

double Tensor::item() const {
  if (size() != 1) {
    throw ShapeError("item() on tensor of shape " + shape_string(shape()));
  }
  return node_->value(0);
}

Tensor Tensor::detach() const { return Tensor(shape(), values()); }

Tensor Tensor::reshaped(Shape new_shape) const {
  if (shape_size(new_shape) != size()) {
    throw ShapeError("cannot reshape " + shape_string(shape()) + " to " +
                     shape_string(new_shape));
  }
  return make_result(std::move(new_shape), values(), {node_},
                     [](const Eigen::ArrayXd& g,
                        std::span<Eigen::ArrayXd*> pg) { accumulate(pg[0], g); });
}

Tensor Tensor::from_node(std::shared_ptr<detail::Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

// ---- Parameter --------------------------------------------------------------

Parameter::Parameter(std::string id, Shape shape, Eigen::ArrayXd init)
    : id_(std::move(id)), tensor_(std::move(shape), std::move(init)) {
  tensor_.node()->requires_grad = true;
  gradient_ = Eigen::ArrayXd::Zero(tensor_.size());
}

Parameter::Parameter(const Parameter& other)
    : Parameter(other.id_, other.shape(), other.values()) {
  gradient_ = other.gradient_;
}

Parameter& Parameter::operator=(const Parameter& other) {
  if (this != &other) *this = Parameter(other);
  return *this;
}

// ---- backward ---------------------------------------------------------------

void backward(const Tensor& loss, std::span<Parameter* const> params) {
  if (loss.size() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                shape_string(loss.shape()));
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  std::unordered_map<Node*, Eigen::ArrayXd> grads;
  grads[loss.node().get()] = Eigen::ArrayXd::Ones(1);
  std::vector<Eigen::ArrayXd*> sinks;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (!node->backward) continue;
    auto found = grads.find(node);
    if (found == grads.end()) continue;
    // The node's own gradient is final once every consumer has run.
    const Eigen::ArrayXd grad = std::move(found->second);
    grads.erase(found);
    sinks.assign(node->parents.size(), nullptr);
    for (std::size_t i = 0; i < node->parents.size(); ++i) {
      Node* parent = node->parents[i].get();
      if (!parent->requires_grad) continue;
      auto [slot, inserted] = grads.try_emplace(parent);
      if (inserted) slot->second = Eigen::ArrayXd::Zero(parent->value.size());
      sinks[i] = &slot->second;  // element addresses survive rehashing
    }
    node->backward(grad, sinks);
  }

  for (Parameter* p : params) {
    auto found = grads.find(p->tensor().node().get());
    if (found != grads.end()) p->mutable_gradient() += found->second;
  }
}

// ---- elementwise ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  const Broadcast mode = check_binary(a, b, "add");
  const Shape shape = mode == Broadcast::kScalarA ? b.shape() : a.shape();
  const Index n = shape_size(shape);
  Eigen::ArrayXd value = expand(a, n) + expand(b, n);
  return make_result(shape, std::move(value), {a.node(), b.node()},
                     [](const Eigen::ArrayXd& g, std::span<Eigen::ArrayXd*> pg) {
                       accumulate(pg[0], g);
                       accumulate(pg[1], g);
                     });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const Broadcast mode = check_binary(a, b, "sub");
  const Shape shape = mode == Broadcast::kScalarA ? b.shape() : a.shape();
  const Index n = shape_size(shape);
  Eigen::ArrayXd value = expand(a, n) - expand(b, n);
  return make_result(shape, std::move(value), {a.node(), b.node()},
                     [](const Eigen::ArrayXd& g, std::span<Eigen::ArrayXd*> pg) {
                       accumulate(pg[0], g);
                       accumulate(pg[1], -g);
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const Broadcast mode = check_binary(a, b, "mul");
  const Shape shape = mode == Broadcast::kScalarA ? b.shape() : a.shape();
  const Index n = shape_size(shape);
  Eigen::ArrayXd av = expand(a, n);
  Eigen::ArrayXd bv = expand(b, n);
  Eigen::ArrayXd value = av * bv;
  return make_result(
      shape, std::move(value), {a.node(), b.node()},
      [av = std::move(av), bv = std::move(bv)](const Eigen::ArrayXd& g,
                                               std::span<Eigen::ArrayXd*> pg) {
        if (pg[0]) accumulate(pg[0], g * bv);
        if (pg[1]) accumulate(pg[1], g * av);
      });
}

Tensor exp(const Tensor& a) {
  const Eigen::ArrayXd& x = a.values();
  Eigen::ArrayXd value = x.cwiseMax(-kExpClamp).cwiseMin(kExpClamp).exp();
  Eigen::ArrayXd slope =
      (x.abs() <= kExpClamp).select(value, Eigen::ArrayXd::Zero(x.size()));
  return make_result(a.shape(), std::move(value), {a.node()},
                     [slope = std::move(slope)](const Eigen::ArrayXd& g,
                                                std::span<Eigen::ArrayXd*> pg) {
                       accumulate(pg[0], g * slope);
                     });
}

Tensor tanh(const Tensor& a) {
  Eigen::ArrayXd value = a.values().tanh();
  Eigen::ArrayXd slope = 1.0 - value.square();
  return make_result(a.shape(), std::move(value), {a.node()},
                     [slope = std::move(slope)](const Eigen::ArrayXd& g,
                                                std::span<Eigen::ArrayXd*> pg) {
                       accumulate(pg[0], g * slope);
                     });
}

Tensor relu(const Tensor& a) {
  Eigen::ArrayXd value = a.values().cwiseMax(0.0);
  Eigen::ArrayXd slope = (a.values() > 0.0).cast<double>();
  return make_result(a.shape(), std::move(value), {a.node()},
                     [slope = std::move(slope)](const Eigen::ArrayXd& g,
                                                std::span<Eigen::ArrayXd*> pg) {
                       accumulate(pg[0], g * slope);
                     });
}

Tensor square(const Tensor& a) {
  Eigen::ArrayXd x = a.values();
  Eigen::ArrayXd value = x.square();
  return make_result(a.shape(), std::move(value), {a.node()},
                     [x = std::move(x)](const Eigen::ArrayXd& g,
                                        std::span<Eigen::ArrayXd*> pg) {
                       accumulate(pg[0], 2.0 * g * x);
                     });
}

Tensor affine(const Tensor& a, double scale, double shift) {
  Eigen::ArrayXd value = scale * a.values() + shift;
  return make_result(a.shape(), std::move(value), {a.node()},
                     [scale](const Eigen::ArrayXd& g,
                             std::span<Eigen::ArrayXd*> pg) {
                       accumulate(pg[0], scale * g);
                     });
}

// ---- reductions -------------------------------------------------------------

Tensor sum(const Tensor& a) {
  return make_result(Shape{1}, Eigen::ArrayXd::Constant(1, a.values().sum()),
                     {a.node()},
                     [](const Eigen::ArrayXd& g, std::span<Eigen::ArrayXd*> pg) {
                       *pg[0] += g(0);
                     });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ShapeError("mean of empty tensor");
  return affine(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor sum_per_sample(const Tensor& a) {
  if (a.rank() < 1 || a.dim(0) == 0) {
    throw ShapeError("sum_per_sample: needs a leading batch axis, got " +
                     shape_string(a.shape()));
  }
  const Index batch = a.dim(0);
  const Index per = a.size() / batch;
  Eigen::Map<const RowMatrix> view(a.values().data(), batch, per);
  Eigen::ArrayXd value = view.rowwise().sum().array();
  return make_result(
      Shape{batch}, std::move(value), {a.node()},
      [batch, per](const Eigen::ArrayXd& g, std::span<Eigen::ArrayXd*> pg) {
        Eigen::Map<RowMatrix> out(pg[0]->data(), batch, per);
        out.colwise() += g.matrix();
      });
}

// ---- structural -------------------------------------------------------------

Tensor gather(const Tensor& a, std::vector<Index> indices, Shape shape) {
  if (shape_size(shape) != static_cast<Index>(indices.size())) {
    throw ShapeError("gather: " + std::to_string(indices.size()) +
                     " indices for shape " + shape_string(shape));
  }
  Eigen::ArrayXd value(static_cast<Index>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= a.size()) {
      throw ShapeError("gather: index out of range");
    }
    value(static_cast<Index>(i)) = a.values()(indices[i]);
  }
  return make_result(std::move(shape), std::move(value), {a.node()},
                     [indices = std::move(indices)](
                         const Eigen::ArrayXd& g, std::span<Eigen::ArrayXd*> pg) {
                       for (std::size_t i = 0; i < indices.size(); ++i) {
                         (*pg[0])(indices[i]) += g(static_cast<Index>(i));
                       }
                     });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.rank() != 4 || b.rank() != 4 || a.dim(0) != b.dim(0) ||
      a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw ShapeError("concat_channels: incompatible shapes " +
                     shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  }
  const Index batch = a.dim(0);
  const Index pa = a.size() / batch;
  const Index pb = b.size() / batch;
  Eigen::ArrayXd value(a.size() + b.size());
  for (Index n = 0; n < batch; ++n) {
    value.segment(n * (pa + pb), pa) = a.values().segment(n * pa, pa);
    value.segment(n * (pa + pb) + pa, pb) = b.values().segment(n * pb, pb);
  }
  Shape shape{batch, a.dim(1) + b.dim(1), a.dim(2), a.dim(3)};
  return make_result(std::move(shape), std::move(value), {a.node(), b.node()},
                     [batch, pa, pb](const Eigen::ArrayXd& g,
                                     std::span<Eigen::ArrayXd*> pg) {
                       for (Index n = 0; n < batch; ++n) {
                         if (pg[0]) {
                           pg[0]->segment(n * pa, pa) +=
                               g.segment(n * (pa + pb), pa);
                         }
                         if (pg[1]) {
                           pg[1]->segment(n * pb, pb) +=
                               g.segment(n * (pa + pb) + pa, pb);
                         }
                       }
                     });
}

Tensor slice_channels(const Tensor& a, Index begin, Index count) {
  if (a.rank() != 4 || begin < 0 || count < 0 || begin + count > a.dim(1)) {
    throw ShapeError("slice_channels: [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " +
                     shape_string(a.shape()));
  }
  const Index batch = a.dim(0);
  const Index plane = a.dim(2) * a.dim(3);
  const Index per = a.dim(1) * plane;
  Eigen::ArrayXd value(batch * count * plane);
  for (Index n = 0; n < batch; ++n) {
    value.segment(n * count * plane, count * plane) =
        a.values().segment(n * per + begin * plane, count * plane);
  }
  Shape shape{batch, count, a.dim(2), a.dim(3)};
  return make_result(std::move(shape), std::move(value), {a.node()},
                     [batch, plane, per, begin, count](
                         const Eigen::ArrayXd& g, std::span<Eigen::ArrayXd*> pg) {
                       for (Index n = 0; n < batch; ++n) {
                         pg[0]->segment(n * per + begin * plane, count * plane) +=
                             g.segment(n * count * plane, count * plane);
                       }
                     });
}

// ---- layers -----------------------------------------------------------------

Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  const ConvGeometry g = conv_geometry(input, weights, bias);
  const Index hw = g.height * g.width;
  const Index in_per = g.in_channels * hw;
  const Index out_per = g.out_channels * hw;
  Eigen::Map<const RowMatrix> kernel(weights.values().data(), g.out_channels,
                                     g.in_channels * 9);
  Eigen::ArrayXd value(g.batch * out_per);
  RowMatrix cols;
  for (Index n = 0; n < g.batch; ++n) {
    im2col(input.values().data() + n * in_per, g, cols);
    Eigen::Map<RowMatrix> out(value.data() + n * out_per, g.out_channels, hw);
    out.noalias() = kernel * cols;
    out.colwise() += bias.values().matrix();
  }
  Shape shape = g.batched
                    ? Shape{g.batch, g.out_channels, g.height, g.width}
                    : Shape{g.out_channels, g.height, g.width};
  // The patch matrix is rebuilt during backward rather than stored.
  return make_result(
      std::move(shape), std::move(value),
      {input.node(), weights.node(), bias.node()},
      [g, hw, in_per, out_per, x = input.node(), w = weights.node()](
          const Eigen::ArrayXd& grad, std::span<Eigen::ArrayXd*> pg) {
        Eigen::Map<const RowMatrix> kernel(w->value.data(), g.out_channels,
                                           g.in_channels * 9);
        RowMatrix cols;
        RowMatrix dcols;
        for (Index n = 0; n < g.batch; ++n) {
          Eigen::Map<const RowMatrix> dout(grad.data() + n * out_per,
                                           g.out_channels, hw);
          if (pg[1]) {
            im2col(x->value.data() + n * in_per, g, cols);
            Eigen::Map<RowMatrix> dkernel(pg[1]->data(), g.out_channels,
                                          g.in_channels * 9);
            dkernel.noalias() += dout * cols.transpose();
          }
          if (pg[2]) *pg[2] += dout.rowwise().sum().array();
          if (pg[0]) {
            dcols.noalias() = kernel.transpose() * dout;
            col2im(dcols, g, pg[0]->data() + n * in_per);
          }
        }
      });
}

Tensor conv2d(const Tensor& input, const Parameter& weights,
              const Parameter& bias) {
  return conv2d(input, weights.tensor(), bias.tensor());
}

Tensor channel_affine(const Tensor& x, const Tensor& offset,
                      const Tensor& log_scale) {
  if (x.rank() != 4 || offset.size() != x.dim(1) ||
      log_scale.size() != x.dim(1)) {
    throw ShapeError("channel_affine: expected [N,C,H,W] with C-sized offset "
                     "and log_scale, got " + shape_string(x.shape()));
  }
  const Index batch = x.dim(0);
  const Index channels = x.dim(1);
  const Index plane = x.dim(2) * x.dim(3);
  const Eigen::ArrayXd scale = log_scale.values().exp();
  Eigen::ArrayXd value(x.size());
  for (Index n = 0; n < batch; ++n) {
    for (Index c = 0; c < channels; ++c) {
      const Index at = (n * channels + c) * plane;
      value.segment(at, plane) =
          (x.values().segment(at, plane) - offset.values()(c)) * scale(c);
    }
  }
  Eigen::ArrayXd out_copy = value;
  return make_result(
      x.shape(), std::move(value), {x.node(), offset.node(), log_scale.node()},
      [batch, channels, plane, scale, out = std::move(out_copy)](
          const Eigen::ArrayXd& g, std::span<Eigen::ArrayXd*> pg) {
        for (Index n = 0; n < batch; ++n) {
          for (Index c = 0; c < channels; ++c) {
            const Index at = (n * channels + c) * plane;
            const auto gs = g.segment(at, plane);
            if (pg[0]) pg[0]->segment(at, plane) += gs * scale(c);
            if (pg[1]) (*pg[1])(c) -= gs.sum() * scale(c);
            if (pg[2]) (*pg[2])(c) += (gs * out.segment(at, plane)).sum();
          }
        }
      });
}

}  // namespace waveflow
