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

// Shared helpers for the unit and acceptance suites. Everything here is an
// independent reference path: nested loops and finite differences, never the
// library's own vectorized code.

#include "waveflow/flow.hpp"
#include "waveflow/tensor.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace waveflow::testing {

inline Eigen::ArrayXd random_array(Index n, std::mt19937_64& rng,
                                   double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::ArrayXd out(n);
  for (Index i = 0; i < n; ++i) out(i) = u(rng);
  return out;
}

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  const Index n = shape_size(shape);
  return Tensor(std::move(shape), random_array(n, rng, lo, hi));
}

// Direct 3x3 zero-padded cross-correlation on one [C, H, W] image.
inline Eigen::ArrayXd conv2d_oracle(const Eigen::ArrayXd& x, Index c, Index h,
                                    Index w, const Eigen::ArrayXd& k, Index co,
                                    const Eigen::ArrayXd& b) {
  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(co * h * w);
  for (Index o = 0; o < co; ++o) {
    for (Index y = 0; y < h; ++y) {
      for (Index xx = 0; xx < w; ++xx) {
        double acc = b(o);
        for (Index i = 0; i < c; ++i) {
          for (Index ky = 0; ky < 3; ++ky) {
            for (Index kx = 0; kx < 3; ++kx) {
              const Index sy = y + ky - 1;
              const Index sx = xx + kx - 1;
              if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
              acc += k(((o * c + i) * 3 + ky) * 3 + kx) * x((i * h + sy) * w + sx);
            }
          }
        }
        out((o * h + y) * w + xx) = acc;
      }
    }
  }
  return out;
}

// Norm-wise relative error |a - b| / max(|b|, floor).
inline double relative_error(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b,
                             double floor = 1e-8) {
  return (a - b).matrix().norm() / std::max(b.matrix().norm(), floor);
}

// Central-difference Jacobian of f: R^n -> R^n at x.
inline Eigen::MatrixXd numeric_jacobian(
    const std::function<Eigen::ArrayXd(const Eigen::ArrayXd&)>& f,
    const Eigen::ArrayXd& x, double eps = 1e-6) {
  const Index n = x.size();
  const Index m = f(x).size();
  Eigen::MatrixXd jac(m, n);
  for (Index j = 0; j < n; ++j) {
    Eigen::ArrayXd up = x;
    Eigen::ArrayXd down = x;
    up(j) += eps;
    down(j) -= eps;
    jac.col(j) = ((f(up) - f(down)) / (2.0 * eps)).matrix();
  }
  return jac;
}

inline double log_abs_det(const Eigen::MatrixXd& m) {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  return lu.matrixLU().diagonal().array().abs().log().sum();
}

// Pairwise P(ood > in) + P(tie) / 2 by exhaustive comparison.
inline double brute_force_auc(const std::vector<double>& in_dist, const std::vector<double>& ood) {
  double wins = 0.0;
  for (double o : ood) {
    for (double i : in_dist) wins += o > i ? 1.0 : (o == i ? 0.5 : 0.0);
  }
  return wins / (static_cast<double>(ood.size()) * static_cast<double>(in_dist.size()));
}

// Factored latents in order, then the final latent, as one vector.
inline Eigen::ArrayXd flatten_latents(const FlowOutput& out) {
  Index n = out.z.size();
  for (const auto& f : out.factored) n += f.size();
  Eigen::ArrayXd flat(n);
  Index at = 0;
  for (const auto& f : out.factored) {
    flat.segment(at, f.size()) = f.values();
    at += f.size();
  }
  flat.segment(at, out.z.size()) = out.z.values();
  return flat;
}

inline std::vector<Tensor> unflatten_latents(const FlowModel& model,
                                      const Eigen::ArrayXd& flat) {
  std::vector<Tensor> latents;
  Index at = 0;
  for (const Shape& s : model.latent_shapes()) {
    const Index n = shape_size(s);
    latents.emplace_back(s, flat.segment(at, n));
    at += n;
  }
  return latents;
}

}  // namespace waveflow::testing
