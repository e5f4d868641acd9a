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

// Image-level training transforms: random affine augmentation and uniform
// dequantization of 8-bit pixels.

#include "waveflow/haar.hpp"

#include <random>

namespace waveflow {

struct Range {
  double min = 0.0;
  double max = 0.0;
};

struct AugmentConfig {
  bool enabled = true;
  Range rotation_degrees{-180.0, 180.0};
  Range translation{-0.1, 0.1};  // fraction of the image extent
  Range scaling{0.9, 1.1};
  Range shear_degrees{-10.0, 10.0};  // applied to x and y independently
};

struct AffineSample {
  double rotation_degrees = 0.0;
  double translate_x = 0.0;
  double translate_y = 0.0;
  double scale = 1.0;
  double shear_x_degrees = 0.0;
  double shear_y_degrees = 0.0;
};

AffineSample sample_affine(std::mt19937_64& rng, const AugmentConfig& config);

// Maps each output pixel back through the inverse warp about the image centre
// and samples bilinearly with edge replication; values are clamped to [0, 1].
Image warp_affine(const Image& image, const AffineSample& warp);

Image augment(const Image& image, std::mt19937_64& rng, const AugmentConfig& config);

// x -> (255 x + u) / 256 with u ~ U[0, 1); identity when disabled.
Image dequantize(const Image& image, std::mt19937_64& rng, bool enabled = true);
// Deterministic counterpart used for evaluation: u = 1/2.
Image dequantize_midpoint(const Image& image, bool enabled = true);

}  // namespace waveflow
