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

#include "waveflow/optim.hpp"

#include <cmath>

namespace waveflow {

void AdamOptimizer::update(std::span<Parameter* const> params) {
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(options_.beta1, t);
  const double correction2 = 1.0 - std::pow(options_.beta2, t);
  for (Parameter* p : params) {
    auto [it, inserted] = moments_.try_emplace(p->id());
    Moments& m = it->second;
    if (inserted || m.first.size() != p->size()) {
      m.first = Eigen::ArrayXd::Zero(p->size());
      m.second = Eigen::ArrayXd::Zero(p->size());
    }
    const Eigen::ArrayXd& g = p->gradient();
    m.first = options_.beta1 * m.first + (1.0 - options_.beta1) * g;
    m.second = options_.beta2 * m.second + (1.0 - options_.beta2) * g.square();
    p->mutable_values() -= options_.learning_rate * (m.first / correction1) /
                           ((m.second / correction2).sqrt() + options_.epsilon);
    p->zero_grad();
  }
}

void zero_grad(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

std::vector<Eigen::ArrayXd> finite_diff_grad(
    const std::function<double()>& loss_fn, std::span<Parameter* const> params,
    double epsilon) {
  std::vector<Eigen::ArrayXd> grads;
  grads.reserve(params.size());
  for (Parameter* p : params) {
    Eigen::ArrayXd g(p->size());
    Eigen::ArrayXd& w = p->mutable_values();
    for (Index i = 0; i < w.size(); ++i) {
      const double saved = w(i);
      w(i) = saved + epsilon;
      const double up = loss_fn();
      w(i) = saved - epsilon;
      const double down = loss_fn();
      w(i) = saved;
      g(i) = (up - down) / (2.0 * epsilon);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

}  // namespace waveflow
