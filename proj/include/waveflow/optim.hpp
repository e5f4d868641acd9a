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

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace waveflow {

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction. Moment estimates are keyed by parameter id, so
// an optimizer can follow a model through copies.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(AdamOptions options = {}) : options_(options) {}

  // Applies one step to every listed parameter, then clears the gradients.
  void update(std::span<Parameter* const> params);

  std::int64_t steps() const { return steps_; }
  const AdamOptions& options() const { return options_; }

 private:
  struct Moments {
    Eigen::ArrayXd first;
    Eigen::ArrayXd second;
  };

  AdamOptions options_;
  std::int64_t steps_ = 0;
  std::map<std::string, Moments> moments_;
};

void zero_grad(std::span<Parameter* const> params);

// Central differences (f(w+eps) - f(w-eps)) / (2 eps), one entry at a time.
// loss_fn must be deterministic in the parameter values.
std::vector<Eigen::ArrayXd> finite_diff_grad(
    const std::function<double()>& loss_fn, std::span<Parameter* const> params,
    double epsilon = 1e-4);

}  // namespace waveflow
