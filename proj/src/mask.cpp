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

#include "waveflow/mask.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace waveflow {

namespace {

struct Grid {
  Index channels, height, width;
  Index at(Index c, Index i, Index j) const {
    return (c * height + i) * width + j;
  }
};

// Every channel shares one spatial pattern.
Eigen::ArrayXd broadcast_spatial(const Grid& g, const Eigen::ArrayXd& plane) {
  Eigen::ArrayXd pass(g.channels * g.height * g.width);
  for (Index c = 0; c < g.channels; ++c) {
    pass.segment(c * plane.size(), plane.size()) = plane;
  }
  return pass;
}

Eigen::ArrayXd channel_window(const Grid& g, Index begin, Index count) {
  Eigen::ArrayXd pass = Eigen::ArrayXd::Zero(g.channels * g.height * g.width);
  const Index plane = g.height * g.width;
  for (Index k = 0; k < count; ++k) {
    const Index c = (begin + k) % g.channels;
    pass.segment(c * plane, plane).setOnes();
  }
  return pass;
}

Index ceil_half(Index n) { return (n + 1) / 2; }

Eigen::ArrayXd channel_half(const Grid& g, int step);
Eigen::ArrayXd checkerboard(const Grid& g, int step);

Eigen::ArrayXd channel_half(const Grid& g, int step) {
  if (g.channels < 2) return checkerboard(g, step);
  Eigen::ArrayXd first = channel_window(g, 0, ceil_half(g.channels));
  return step % 2 == 0 ? first : Eigen::ArrayXd(1.0 - first);
}

Eigen::ArrayXd checkerboard(const Grid& g, int step) {
  if (g.height * g.width < 2) return channel_half(g, step);
  Eigen::ArrayXd plane(g.height * g.width);
  for (Index i = 0; i < g.height; ++i) {
    for (Index j = 0; j < g.width; ++j) {
      plane(i * g.width + j) = (i + j + step) % 2 == 0 ? 1.0 : 0.0;
    }
  }
  return broadcast_spatial(g, plane);
}

Eigen::ArrayXd horizontal(const Grid& g, int step) {
  Eigen::ArrayXd plane(g.height * g.width);
  if (g.height >= 2) {
    for (Index i = 0; i < g.height; ++i) {
      plane.segment(i * g.width, g.width)
          .setConstant(i < ceil_half(g.height) ? 1.0 : 0.0);
    }
  } else if (g.width >= 2) {
    for (Index j = 0; j < g.width; ++j) {
      plane(j) = j < ceil_half(g.width) ? 1.0 : 0.0;
    }
  } else {
    return channel_half(g, step);
  }
  if (step % 2 != 0) plane = 1.0 - plane;
  return broadcast_spatial(g, plane);
}

Eigen::ArrayXd cycle(const Grid& g, int step) {
  if (g.channels < 2) return checkerboard(g, step);
  return channel_window(g, step % g.channels, ceil_half(g.channels));
}

// Cells ranked by city-block distance from the grid centre, ties broken by
// raster order; the nearer half passes on even steps.
Eigen::ArrayXd radial(const Grid& g, int step) {
  const Index cells = g.height * g.width;
  if (cells < 2) return channel_half(g, step);
  const double ci = 0.5 * static_cast<double>(g.height - 1);
  const double cj = 0.5 * static_cast<double>(g.width - 1);
  std::vector<Index> order(static_cast<std::size_t>(cells));
  std::iota(order.begin(), order.end(), Index{0});
  auto distance = [&](Index cell) {
    const double i = static_cast<double>(cell / g.width);
    const double j = static_cast<double>(cell % g.width);
    return std::abs(i - ci) + std::abs(j - cj);
  };
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return distance(a) < distance(b);
  });
  Eigen::ArrayXd plane = Eigen::ArrayXd::Zero(cells);
  for (Index k = 0; k < ceil_half(cells); ++k) plane(order[k]) = 1.0;
  if (step % 2 != 0) plane = 1.0 - plane;
  return broadcast_spatial(g, plane);
}

}  // namespace

std::string to_string(MaskStrategy strategy) {
  switch (strategy) {
    case MaskStrategy::kChannelHalf: return "channel-half";
    case MaskStrategy::kCheckerboard: return "checkerboard";
    case MaskStrategy::kCycle: return "cycle";
    case MaskStrategy::kHorizontal: return "horizontal";
    case MaskStrategy::kRadial: return "radial";
  }
  return "unknown";
}

MaskStrategy parse_mask_strategy(std::string_view name) {
  for (MaskStrategy s : all_mask_strategies()) {
    if (to_string(s) == name) return s;
  }
  throw std::invalid_argument("unknown mask strategy '" + std::string(name) +
                              "'");
}

const std::vector<MaskStrategy>& all_mask_strategies() {
  static const std::vector<MaskStrategy> all{
      MaskStrategy::kChannelHalf, MaskStrategy::kCheckerboard,
      MaskStrategy::kCycle, MaskStrategy::kHorizontal, MaskStrategy::kRadial};
  return all;
}

Mask make_mask(MaskStrategy strategy, int step_index, const Shape& shape) {
  if (shape.size() != 3) {
    throw ShapeError("make_mask: expected [C,H,W], got " + shape_string(shape));
  }
  if (step_index < 0) throw std::invalid_argument("make_mask: negative step");
  const Grid g{shape[0], shape[1], shape[2]};
  if (shape_size(shape) < 2) {
    throw std::invalid_argument("mask cannot split one element");
  }
  Mask mask;
  mask.strategy = strategy;
  mask.step_index = step_index;
  mask.shape = shape;
  switch (strategy) {
    case MaskStrategy::kChannelHalf: mask.pass = channel_half(g, step_index); break;
    case MaskStrategy::kCheckerboard: mask.pass = checkerboard(g, step_index); break;
    case MaskStrategy::kCycle: mask.pass = cycle(g, step_index); break;
    case MaskStrategy::kHorizontal: mask.pass = horizontal(g, step_index); break;
    case MaskStrategy::kRadial: mask.pass = radial(g, step_index); break;
  }
  return mask;
}

}  // namespace waveflow
