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

#include "waveflow/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace waveflow {

namespace {

double uniform(std::mt19937_64& rng, const Range& r) {
  if (r.max <= r.min) return r.min;
  return std::uniform_real_distribution<double>(r.min, r.max)(rng);
}

double radians(double degrees) { return degrees * std::numbers::pi / 180.0; }

// Coordinates within 1e-9 of the lattice snap to it, so lattice-exact warps
// such as a half turn reproduce pixels bit for bit.
double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-9 ? r : v;
}

}  // namespace

AffineSample sample_affine(std::mt19937_64& rng, const AugmentConfig& config) {
  AffineSample s;
  s.rotation_degrees = uniform(rng, config.rotation_degrees);
  s.translate_x = uniform(rng, config.translation);
  s.translate_y = uniform(rng, config.translation);
  s.scale = uniform(rng, config.scaling);
  s.shear_x_degrees = uniform(rng, config.shear_degrees);
  s.shear_y_degrees = uniform(rng, config.shear_degrees);
  return s;
}

Image warp_affine(const Image& image, const AffineSample& warp) {
  const Eigen::Index rows = image.rows();
  const Eigen::Index cols = image.cols();
  const double theta = radians(warp.rotation_degrees);
  Eigen::Matrix2d rotation;
  rotation << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  Eigen::Matrix2d shear;
  shear << 1.0, std::tan(radians(warp.shear_x_degrees)),
      std::tan(radians(warp.shear_y_degrees)), 1.0;
  // Forward map in (x, y) = (column, row) about the centre.
  const Eigen::Matrix2d forward = rotation * shear * warp.scale;
  const Eigen::Matrix2d inverse = forward.inverse();
  const Eigen::Vector2d centre(0.5 * static_cast<double>(cols - 1),
                               0.5 * static_cast<double>(rows - 1));
  const Eigen::Vector2d shift(warp.translate_x * static_cast<double>(cols),
                              warp.translate_y * static_cast<double>(rows));

  auto at = [&](Eigen::Index r, Eigen::Index c) {
    r = std::clamp<Eigen::Index>(r, 0, rows - 1);
    c = std::clamp<Eigen::Index>(c, 0, cols - 1);
    return image(r, c);
  };

  Image out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const Eigen::Vector2d p(static_cast<double>(c), static_cast<double>(r));
      const Eigen::Vector2d src = inverse * (p - centre - shift) + centre;
      const double x = snap(src.x());
      const double y = snap(src.y());
      const double x0 = std::floor(x);
      const double y0 = std::floor(y);
      const double fx = x - x0;
      const double fy = y - y0;
      const auto ix = static_cast<Eigen::Index>(x0);
      const auto iy = static_cast<Eigen::Index>(y0);
      double v = (1 - fy) * ((1 - fx) * at(iy, ix) + fx * at(iy, ix + 1)) +
                 fy * ((1 - fx) * at(iy + 1, ix) + fx * at(iy + 1, ix + 1));
      out(r, c) = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

Image augment(const Image& image, std::mt19937_64& rng, const AugmentConfig& config) {
  if (!config.enabled) return image;
  return warp_affine(image, sample_affine(rng, config));
}

Image dequantize(const Image& image, std::mt19937_64& rng, bool enabled) {
  if (!enabled) return image;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image out(image.rows(), image.cols());
  for (Eigen::Index i = 0; i < image.size(); ++i) {
    out.data()[i] = (255.0 * image.data()[i] + u(rng)) / 256.0;
  }
  return out;
}

Image dequantize_midpoint(const Image& image, bool enabled) {
  if (!enabled) return image;
  return (255.0 * image + 0.5) / 256.0;
}

}  // namespace waveflow
