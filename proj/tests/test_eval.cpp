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
#include "test_support.hpp"
#include "waveflow/eval.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace waveflow;
using waveflow::testing::brute_force_auc;

namespace {

// Scores drawn from a small integer lattice so ties are common.
ScoreSet random_scores(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> size(1, 40), value(0, 12);
  ScoreSet s;
  const int ni = size(rng), no = size(rng);
  for (int i = 0; i < ni; ++i) s.in_dist.push_back(value(rng) * 0.25);
  for (int i = 0; i < no; ++i) s.ood.push_back(value(rng) * 0.25 + 0.5);
  return s;
}

}  // namespace

TEST_CASE("auc examples") {
  CHECK(auc({{0.1, 0.7}, {0.9, 0.8}}) == 1.0);
  CHECK(auc({{0.3, 0.5, 0.5}, {0.5, 0.3, 0.5}}) == 0.5);
  CHECK(auc({{0.4, 0.8}, {0.6}}) == 0.5);
  CHECK(auc({{1.0}, {0.0}}) == 0.0);
  CHECK_THROWS_AS(auc({{}, {1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(auc({{1.0}, {}}), std::invalid_argument);
  CHECK_THROWS_AS(auc({{std::nan("")}, {1.0}}), std::invalid_argument);
}

TEST_CASE("rank statistic matches pairwise count and ROC area") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const ScoreSet s = random_scores(rng);
    const double a = auc(s);
    CHECK(std::abs(a - brute_force_auc(s.in_dist, s.ood)) <= 1e-12);
    const RocCurve roc = roc_points(s);
    CHECK(std::abs(trapezoid_area(roc.points) - a) <= 1e-12);
    CHECK(roc.auc == a);
  }
}

TEST_CASE("roc curve shape") {
  const RocCurve sep = roc_points({{0.1, 0.2}, {0.8, 0.9}});
  const std::vector<std::pair<double, double>> expected{{0, 0}, {0, 0.5}, {0, 1}, {0.5, 1}, {1, 1}};
  CHECK(sep.points == expected);
  CHECK(trapezoid_area(sep.points) == 1.0);
  const RocCurve single = roc_points({{0.2}, {0.9}});
  CHECK(trapezoid_area(single.points) == 1.0);

  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const RocCurve roc = roc_points(random_scores(rng));
    CHECK(roc.points.front() == std::pair<double, double>{0.0, 0.0});
    CHECK(roc.points.back() == std::pair<double, double>{1.0, 1.0});
    for (std::size_t i = 1; i < roc.points.size(); ++i) {
      CHECK(roc.points[i].first >= roc.points[i - 1].first);
      CHECK(roc.points[i].second >= roc.points[i - 1].second);
    }
  }
}

TEST_CASE("auc invariances") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const ScoreSet s = random_scores(rng);
    ScoreSet shifted = s;
    for (double& v : shifted.in_dist) v = std::exp(v) + 3.0;
    for (double& v : shifted.ood) v = std::exp(v) + 3.0;
    CHECK(auc(shifted) == auc(s));
    const ScoreSet swapped{s.ood, s.in_dist};
    CHECK(std::abs(auc(swapped) - (1.0 - auc(s))) <= 1e-15);
  }
}

TEST_CASE("histogram") {
  const Histogram one = histogram({{0.5}, {}}, 1);
  CHECK(one.in_dist == std::vector<int>{1});
  CHECK(one.edges.size() == 2);
  CHECK_THROWS_AS(histogram({{}, {}}, 3), std::invalid_argument);
  CHECK_THROWS_AS(histogram({{1.0}, {2.0}}, 0), std::invalid_argument);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ScoreSet s;
  for (int i = 0; i < 5000; ++i) s.in_dist.push_back(u(rng));
  for (int i = 0; i < 3000; ++i) s.ood.push_back(u(rng));
  const Histogram h = histogram(s, 10);
  int in_total = 0, ood_total = 0;
  for (std::size_t b = 0; b < 10; ++b) {
    in_total += h.in_dist[b];
    ood_total += h.ood[b];
    // Binomial sd is about 21 for 5000 draws over 10 bins; allow 5 sd.
    CHECK(std::abs(h.in_dist[b] - 500) < 105);
  }
  CHECK(in_total == 5000);
  CHECK(ood_total == 3000);
  const double lo = std::min(*std::min_element(s.in_dist.begin(), s.in_dist.end()),
                             *std::min_element(s.ood.begin(), s.ood.end()));
  CHECK(h.edges.front() == lo);
}

TEST_CASE("wavelet magnitude baseline") {
  const MagnitudeScore flat = wavelet_magnitude_score(Image::Constant(32, 32, 0.4));
  for (const auto& [level, v] : flat.per_level) CHECK(v == 0.0);
  CHECK(flat.scoring_levels == std::vector<int>{3, 4, 5});
  CHECK(flat.averaged == 0.0);

  Image checker(32, 32);
  for (Index y = 0; y < 32; ++y) {
    for (Index x = 0; x < 32; ++x) checker(y, x) = 0.5 + ((x + y) % 2 ? 0.2 : -0.2);
  }
  const MagnitudeScore c = wavelet_magnitude_score(checker);
  for (int level = 1; level < 5; ++level) CHECK(c.per_level.at(5) > c.per_level.at(level));
  CHECK(c.per_level.at(5) == doctest::Approx(0.4 / 3.0));
  CHECK(c.averaged == doctest::Approx(c.per_level.at(5) / 3.0));
  CHECK_THROWS_AS(wavelet_magnitude_score(Image::Zero(24, 24)), std::invalid_argument);
}

TEST_CASE("score records and metrics") {
  const auto path = std::filesystem::temp_directory_path() / "waveflow_scores.jsonl";
  std::vector<ScoreRecord> records;
  for (int i = 0; i < 6; ++i) {
    ScoreRecord r;
    r.path = "images/" + std::to_string(i) + ".pgm";
    r.label = i < 3 ? Label::kInDist : Label::kOod;
    r.score = 1.0 + i * 0.25;
    r.level_scores = {{3, 0.1 * i}, {4, -0.1 * i}};
    records.push_back(r);
  }
  write_score_records(records, path);
  const auto back = read_score_records(path);
  REQUIRE(back.size() == records.size());
  CHECK(back[4].score == records[4].score);
  CHECK(back[4].level_scores == records[4].level_scores);
  const nlohmann::json m = evaluate_records(back, 4);
  CHECK(m["score"]["auc"] == 1.0);
  CHECK(m["levels"]["3"]["auc"] == 1.0);
  CHECK(m["levels"]["4"]["auc"] == 0.0);
  CHECK(m["counts"]["ood"] == 3);
  CHECK(m["score"]["histogram"]["in_dist"].size() == 4);

  CHECK_THROWS_WITH_AS(evaluate_records({}), doctest::Contains("no scores"), std::invalid_argument);
  std::vector<ScoreRecord> only_in(records.begin(), records.begin() + 3);
  CHECK_THROWS_AS(evaluate_records(only_in), std::invalid_argument);
  std::ofstream(path) << "{\"path\": 1}\n";
  CHECK_THROWS_WITH_AS(read_score_records(path), doctest::Contains("line 1"), DataError);
  std::filesystem::remove(path);
}
