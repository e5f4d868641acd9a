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

#include "waveflow/tensor.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace waveflow {

enum class MaskStrategy { kChannelHalf, kCheckerboard, kCycle, kHorizontal, kRadial };

std::string to_string(MaskStrategy strategy);
MaskStrategy parse_mask_strategy(std::string_view name);
const std::vector<MaskStrategy>& all_mask_strategies();

// Binary partition of a [C, H, W] grid. pass(i) == 1 marks entries fed to the
// s,t-network; the complement is transformed by the coupling.
struct Mask {
  MaskStrategy strategy = MaskStrategy::kChannelHalf;
  int step_index = 0;
  Shape shape;
  Eigen::ArrayXd pass;

  Index pass_count() const { return static_cast<Index>(pass.sum()); }
  Index masked_count() const { return pass.size() - pass_count(); }
};

// Deterministic in (strategy, step_index, shape). Spatial strategies that
// cannot split a grid (a single row, a single cell) fall back to a split that
// can, so both partitions are always non-empty.
Mask make_mask(MaskStrategy strategy, int step_index, const Shape& shape);

}  // namespace waveflow
