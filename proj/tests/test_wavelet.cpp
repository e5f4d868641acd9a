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

#include "doctest.h"
#include "waveflow/haar.hpp"

#include <random>

using namespace waveflow;

namespace {

Image random_image(Eigen::Index size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(size, size);
  for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] = u(rng);
  return img;
}

}  // namespace

TEST_CASE("haar_forward on a constant image") {
  const Image img = Image::Constant(4, 4, 0.3);
  const auto level = haar_forward(img);
  CHECK((level.low - 0.6).abs().maxCoeff() < 1e-15);
  for (const auto& d : level.detail) CHECK(d.abs().maxCoeff() == 0.0);
}

TEST_CASE("haar block example and its inverse") {
  Image block(2, 2);
  block << 1, 2, 3, 4;
  const auto level = haar_forward(block);
  CHECK(level.low(0, 0) == 5.0);
  CHECK(level.detail[0](0, 0) == -2.0);
  CHECK(level.detail[1](0, 0) == -1.0);
  CHECK(level.detail[2](0, 0) == 0.0);
  const double energy = level.low.square().sum() + level.detail[0].square().sum() +
                        level.detail[1].square().sum() + level.detail[2].square().sum();
  CHECK(energy == 30.0);
  const Image back = haar_inverse(level);
  CHECK(back(0, 0) == 1.0);
  CHECK(back(0, 1) == 2.0);
  CHECK(back(1, 0) == 3.0);
  CHECK(back(1, 1) == 4.0);
}

TEST_CASE("haar errors name the odd axis") {
  const Image tall = Image::Zero(3, 4);
  CHECK_THROWS_WITH_AS(haar_forward(tall), doctest::Contains("height"),
                       std::invalid_argument);
  const Image wide = Image::Zero(4, 5);
  CHECK_THROWS_WITH_AS(haar_forward(wide), doctest::Contains("width"),
                       std::invalid_argument);
}

TEST_CASE("haar_inverse of zero coefficients is zero") {
  HaarLevel<double> level;
  level.low = Image::Zero(3, 3);
  for (auto& d : level.detail) d = Image::Zero(3, 3);
  CHECK(haar_inverse(level).abs().maxCoeff() == 0.0);
  level.detail[1] = Image::Zero(2, 3);
  CHECK_THROWS_AS(haar_inverse(level), std::invalid_argument);
}

TEST_CASE("single-level round trip and linearity") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const Image x = random_image(8, rng);
    const Image y = random_image(8, rng);
    CHECK((haar_inverse(haar_forward(x)) - x).abs().maxCoeff() < 1e-12);

    const double alpha = 0.7, beta = -1.3;
    const auto combined = haar_forward(Image(alpha * x + beta * y));
    const auto hx = haar_forward(x);
    const auto hy = haar_forward(y);
    CHECK((combined.low - (alpha * hx.low + beta * hy.low)).abs().maxCoeff() < 1e-12);
    for (int c = 0; c < 3; ++c) {
      CHECK((combined.detail[c] - (alpha * hx.detail[c] + beta * hy.detail[c]))
                .abs()
                .maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("pyramid shapes and numbering") {
  const Image img = Image::Zero(32, 32);
  const auto full = build_pyramid(img);
  REQUIRE(full.depth() == 5);
  const int sizes[] = {16, 8, 4, 2, 1};
  for (int k = 0; k < 5; ++k) {
    CHECK(full.levels[k].rows() == sizes[k]);
    CHECK(full.levels[k].level_index == 5 - k);
  }
  CHECK(full.base.rows() == 1);
  CHECK(full.level(1).rows() == 1);
  CHECK(full.level(5).rows() == 16);

  const auto shallow = build_pyramid(img, 1);
  CHECK(shallow.depth() == 1);
  CHECK(shallow.base.rows() == 16);
  CHECK(shallow.base.cols() == 16);
}

TEST_CASE("pyramid rejects non power-of-two and non-square input") {
  CHECK_THROWS_AS(build_pyramid(Image(Image::Zero(12, 12))), std::invalid_argument);
  CHECK_THROWS_AS(build_pyramid(Image(Image::Zero(8, 16))), std::invalid_argument);
  CHECK_THROWS_AS(build_pyramid(Image(Image::Zero(8, 8)), 4), std::invalid_argument);
}

TEST_CASE("pyramid round trip and energy conservation") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const Image x = random_image(32, rng);
    const auto pyramid = build_pyramid(x);
    CHECK((reconstruct(pyramid) - x).abs().maxCoeff() < 1e-6);
    const double energy = x.square().sum();
    CHECK(std::abs(energy - pyramid_energy(pyramid)) / energy < 1e-9);
  }
}

TEST_CASE("reconstruct of constant and low-pass-only pyramids") {
  const Image c = Image::Constant(16, 16, 0.42);
  CHECK((reconstruct(build_pyramid(c)) - c).abs().maxCoeff() < 1e-12);

  std::mt19937_64 rng(4);
  const Image x = random_image(16, rng);
  auto pyramid = build_pyramid(x);
  for (auto& level : pyramid.levels) {
    for (auto& d : level.detail) d.setZero();
  }
  const Image blurred = reconstruct(pyramid);
  CHECK(std::abs(blurred.mean() - x.mean()) < 1e-12);
  CHECK((blurred - blurred(0, 0)).abs().maxCoeff() < 1e-12);

  pyramid.levels[1].detail[0] = Image::Zero(3, 3);
  CHECK_THROWS_AS(reconstruct(pyramid), std::invalid_argument);
}

TEST_CASE("haar is templated on the scalar type") {
  Plane<float> block(2, 2);
  block << 1.f, 2.f, 3.f, 4.f;
  const auto level = haar_forward(block);
  static_assert(std::is_same_v<decltype(level.low)::Scalar, float>);
  CHECK(level.low(0, 0) == 5.f);
}
