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

// Orthonormal 2-D Haar transform. For each 2x2 block [[a, b], [c, d]]:
//
//   LL = (a + b + c + d) / 2     LH = (a + b - c - d) / 2
//   HL = (a - b + c - d) / 2     HH = (a - b - c + d) / 2
//
// Detail channels are always ordered LH, HL, HH. The transform preserves the
// sum of squares, so energies and per-level likelihoods are comparable across
// scales.

#include <Eigen/Dense>

#include <array>
#include <bit>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace waveflow {

template <typename Scalar>
using Plane =
    Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Image = Plane<double>;

enum class DetailChannel : int { kLH = 0, kHL = 1, kHH = 2 };

template <typename Scalar>
struct HaarLevel {
  Plane<Scalar> low;
  std::array<Plane<Scalar>, 3> detail;
  // Counted from the coarsest level of a pyramid (coarsest = 1).
  int level_index = 1;

  Eigen::Index rows() const { return low.rows(); }
  Eigen::Index cols() const { return low.cols(); }
};

// levels[0] is the full-resolution decomposition; base is the final low-pass.
template <typename Scalar>
struct HaarPyramid {
  std::vector<HaarLevel<Scalar>> levels;
  Plane<Scalar> base;

  int depth() const { return static_cast<int>(levels.size()); }

  // Finds the level with the given coarse-first index.
  const HaarLevel<Scalar>& level(int level_index) const {
    for (const auto& l : levels) {
      if (l.level_index == level_index) return l;
    }
    throw std::out_of_range("no pyramid level " + std::to_string(level_index));
  }
};

template <typename Derived>
HaarLevel<typename Derived::Scalar> haar_forward(
    const Eigen::DenseBase<Derived>& image) {
  using Scalar = typename Derived::Scalar;
  if (image.rows() % 2 != 0) {
    throw std::invalid_argument("haar_forward: odd height " +
                                std::to_string(image.rows()));
  }
  if (image.cols() % 2 != 0) {
    throw std::invalid_argument("haar_forward: odd width " +
                                std::to_string(image.cols()));
  }
  const Eigen::Index h = image.rows() / 2;
  const Eigen::Index w = image.cols() / 2;
  HaarLevel<Scalar> out;
  out.low.resize(h, w);
  for (auto& d : out.detail) d.resize(h, w);
  const Scalar half(0.5);
  for (Eigen::Index i = 0; i < h; ++i) {
    for (Eigen::Index j = 0; j < w; ++j) {
      const Scalar a = image(2 * i, 2 * j);
      const Scalar b = image(2 * i, 2 * j + 1);
      const Scalar c = image(2 * i + 1, 2 * j);
      const Scalar d = image(2 * i + 1, 2 * j + 1);
      out.low(i, j) = half * (a + b + c + d);
      out.detail[0](i, j) = half * (a + b - c - d);
      out.detail[1](i, j) = half * (a - b + c - d);
      out.detail[2](i, j) = half * (a - b - c + d);
    }
  }
  return out;
}

template <typename Scalar>
Plane<Scalar> haar_inverse(const HaarLevel<Scalar>& level) {
  const Eigen::Index h = level.low.rows();
  const Eigen::Index w = level.low.cols();
  for (const auto& d : level.detail) {
    if (d.rows() != h || d.cols() != w) {
      throw std::invalid_argument(
          "haar_inverse: detail and low-pass extents differ");
    }
  }
  Plane<Scalar> image(2 * h, 2 * w);
  const Scalar half(0.5);
  for (Eigen::Index i = 0; i < h; ++i) {
    for (Eigen::Index j = 0; j < w; ++j) {
      const Scalar ll = level.low(i, j);
      const Scalar lh = level.detail[0](i, j);
      const Scalar hl = level.detail[1](i, j);
      const Scalar hh = level.detail[2](i, j);
      image(2 * i, 2 * j) = half * (ll + lh + hl + hh);
      image(2 * i, 2 * j + 1) = half * (ll + lh - hl - hh);
      image(2 * i + 1, 2 * j) = half * (ll - lh + hl - hh);
      image(2 * i + 1, 2 * j + 1) = half * (ll - lh - hl + hh);
    }
  }
  return image;
}

inline bool is_power_of_two(Eigen::Index n) {
  return n > 0 && std::has_single_bit(static_cast<unsigned long long>(n));
}

inline int log2_size(Eigen::Index n) {
  return std::bit_width(static_cast<unsigned long long>(n)) - 1;
}

// Repeated haar_forward on successive low-pass images. depth defaults to the
// full decomposition down to a 1x1 base.
template <typename Derived>
HaarPyramid<typename Derived::Scalar> build_pyramid(
    const Eigen::DenseBase<Derived>& image, std::optional<int> depth = {}) {
  using Scalar = typename Derived::Scalar;
  if (image.rows() != image.cols()) {
    throw std::invalid_argument("build_pyramid: image must be square, got " +
                                std::to_string(image.rows()) + "x" +
                                std::to_string(image.cols()));
  }
  if (!is_power_of_two(image.rows())) {
    throw std::invalid_argument("build_pyramid: size " +
                                std::to_string(image.rows()) +
                                " is not a power of two");
  }
  const int max_depth = log2_size(image.rows());
  const int n = depth.value_or(max_depth);
  if (n < 1 || n > max_depth) {
    throw std::invalid_argument("build_pyramid: depth " + std::to_string(n) +
                                " outside [1, " + std::to_string(max_depth) +
                                "]");
  }
  HaarPyramid<Scalar> pyramid;
  pyramid.levels.reserve(static_cast<std::size_t>(n));
  Plane<Scalar> current = image;
  for (int k = 0; k < n; ++k) {
    auto level = haar_forward(current);
    level.level_index = n - k;
    current = level.low;
    pyramid.levels.push_back(std::move(level));
  }
  pyramid.base = std::move(current);
  return pyramid;
}

// Folds haar_inverse from the base upward, using the pyramid's own detail
// channels (the stored low-pass images are ignored).
template <typename Scalar>
Plane<Scalar> reconstruct(const HaarPyramid<Scalar>& pyramid) {
  Plane<Scalar> current = pyramid.base;
  for (auto it = pyramid.levels.rbegin(); it != pyramid.levels.rend(); ++it) {
    if (it->detail[0].rows() != current.rows() ||
        it->detail[0].cols() != current.cols()) {
      throw std::invalid_argument(
          "reconstruct: level " + std::to_string(it->level_index) +
          " detail extents do not match the low-pass below it");
    }
    HaarLevel<Scalar> step{current, it->detail, it->level_index};
    current = haar_inverse(step);
  }
  return current;
}

template <typename Scalar>
Scalar pyramid_energy(const HaarPyramid<Scalar>& pyramid) {
  Scalar e = pyramid.base.square().sum();
  for (const auto& level : pyramid.levels) {
    for (const auto& d : level.detail) e += d.square().sum();
  }
  return e;
}

}  // namespace waveflow
