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

#include "waveflow/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace waveflow {

namespace {

void check_scores(const ScoreSet& s) {
  if (s.in_dist.empty() || s.ood.empty()) {
    throw std::invalid_argument("auc: both classes need at least one score");
  }
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  if (!finite(s.in_dist) || !finite(s.ood)) throw std::invalid_argument("auc: non-finite score");
}

}  // namespace

double auc(const ScoreSet& scores) {
  check_scores(scores);
  struct Item {
    double value;
    bool ood;
  };
  std::vector<Item> pooled;
  for (double v : scores.in_dist) pooled.push_back({v, false});
  for (double v : scores.ood) pooled.push_back({v, true});
  std::sort(pooled.begin(), pooled.end(), [](const Item& a, const Item& b) { return a.value < b.value; });
  // Twice the ood rank sum, using 1-based midranks; all terms are integers.
  long long twice_rank_sum = 0;
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t j = i;
    long long ood_in_group = 0;
    while (j < pooled.size() && pooled[j].value == pooled[i].value) {
      ood_in_group += pooled[j].ood ? 1 : 0;
      ++j;
    }
    twice_rank_sum += ood_in_group * static_cast<long long>(i + 1 + j);
    i = j;
  }
  const auto n_ood = static_cast<long long>(scores.ood.size());
  const auto n_in = static_cast<long long>(scores.in_dist.size());
  const long long twice_u = twice_rank_sum - n_ood * (n_ood + 1);
  return static_cast<double>(twice_u) / static_cast<double>(2 * n_ood * n_in);
}

RocCurve roc_points(const ScoreSet& scores) {
  check_scores(scores);
  std::vector<double> in = scores.in_dist, ood = scores.ood;
  std::sort(in.begin(), in.end(), std::greater<>());
  std::sort(ood.begin(), ood.end(), std::greater<>());
  std::vector<double> thresholds = in;
  thresholds.insert(thresholds.end(), ood.begin(), ood.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  RocCurve curve;
  curve.points.emplace_back(0.0, 0.0);
  std::size_t fp = 0, tp = 0;
  const auto n_in = static_cast<double>(in.size()), n_ood = static_cast<double>(ood.size());
  for (double t : thresholds) {
    while (fp < in.size() && in[fp] >= t) ++fp;
    while (tp < ood.size() && ood[tp] >= t) ++tp;
    curve.points.emplace_back(static_cast<double>(fp) / n_in, static_cast<double>(tp) / n_ood);
  }
  curve.auc = auc(scores);
  return curve;
}

double trapezoid_area(const std::vector<std::pair<double, double>>& points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].first - points[i - 1].first) * (points[i].second + points[i - 1].second) / 2.0;
  }
  return area;
}

Histogram histogram(const ScoreSet& scores, int bins) {
  if (bins < 1) throw std::invalid_argument("histogram: bins must be at least 1");
  if (scores.in_dist.empty() && scores.ood.empty()) throw std::invalid_argument("histogram: no scores");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto* v : {&scores.in_dist, &scores.ood}) {
    for (double x : *v) {
      if (!std::isfinite(x)) throw std::invalid_argument("histogram: non-finite score");
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  Histogram h;
  h.in_dist.assign(static_cast<std::size_t>(bins), 0);
  h.ood.assign(static_cast<std::size_t>(bins), 0);
  const double width = (hi - lo) / bins;
  for (int i = 0; i <= bins; ++i) h.edges.push_back(i == bins ? hi : lo + width * i);
  auto bin_of = [&](double x) {
    if (width == 0.0) return 0;
    return std::clamp(static_cast<int>((x - lo) / width), 0, bins - 1);
  };
  for (double x : scores.in_dist) ++h.in_dist[static_cast<std::size_t>(bin_of(x))];
  for (double x : scores.ood) ++h.ood[static_cast<std::size_t>(bin_of(x))];
  return h;
}

MagnitudeScore wavelet_magnitude_score(const Image& image, std::optional<int> depth) {
  const HaarPyramid<double> pyramid = build_pyramid(image, depth);
  MagnitudeScore out;
  for (const HaarLevel<double>& level : pyramid.levels) {
    double total = 0.0;
    for (const auto& d : level.detail) total += d.abs().sum();
    out.per_level[level.level_index] = total / static_cast<double>(3 * level.low.size());
    if (level.low.rows() >= 4) out.scoring_levels.push_back(level.level_index);
  }
  std::sort(out.scoring_levels.begin(), out.scoring_levels.end());
  double sum = 0.0;
  for (int l : out.scoring_levels) sum += out.per_level.at(l);
  out.averaged = out.scoring_levels.empty() ? 0.0 : sum / static_cast<double>(out.scoring_levels.size());
  return out;
}

nlohmann::json to_json(const ScoreRecord& r) {
  nlohmann::json levels = nlohmann::json::object();
  for (const auto& [level, v] : r.level_scores) levels[std::to_string(level)] = v;
  return {{"path", r.path},
          {"label", to_string(r.label)},
          {"split", to_string(r.split)},
          {"score", r.score},
          {"level_scores", levels}};
}

ScoreRecord score_record_from_json(const nlohmann::json& j) {
  ScoreRecord r;
  r.path = j.at("path").get<std::string>();
  r.label = parse_label(j.at("label").get<std::string>());
  r.split = parse_split(j.at("split").get<std::string>());
  r.score = j.at("score").get<double>();
  for (const auto& [key, v] : j.at("level_scores").items()) r.level_scores[std::stoi(key)] = v.get<double>();
  return r;
}

void write_score_records(const std::vector<ScoreRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write scores " + path.string());
  for (const auto& r : records) out << to_json(r).dump() << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<ScoreRecord> read_score_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open scores " + path.string());
  std::vector<ScoreRecord> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    try {
      if (j.is_discarded()) throw std::invalid_argument("not valid JSON");
      out.push_back(score_record_from_json(j));
    } catch (const std::exception& e) {
      throw DataError(path.string() + ": line " + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

namespace {

nlohmann::json score_metrics(const ScoreSet& s, int bins) {
  const RocCurve roc = roc_points(s);
  const Histogram h = histogram(s, bins);
  nlohmann::json points = nlohmann::json::array();
  for (const auto& [fpr, tpr] : roc.points) points.push_back({fpr, tpr});
  return {{"auc", roc.auc},
          {"roc", points},
          {"histogram", {{"edges", h.edges}, {"in_dist", h.in_dist}, {"ood", h.ood}}}};
}

}  // namespace

nlohmann::json evaluate_records(const std::vector<ScoreRecord>& records, int bins) {
  if (records.empty()) throw std::invalid_argument("no scores");
  ScoreSet overall;
  std::map<int, ScoreSet> levels;
  std::map<int, std::size_t> present;
  for (const auto& r : records) {
    (r.label == Label::kOod ? overall.ood : overall.in_dist).push_back(r.score);
    for (const auto& [level, v] : r.level_scores) {
      ScoreSet& s = levels[level];
      (r.label == Label::kOod ? s.ood : s.in_dist).push_back(v);
      ++present[level];
    }
  }
  if (overall.in_dist.empty() || overall.ood.empty()) {
    throw std::invalid_argument("scores need both in_dist and ood records");
  }
  nlohmann::json per_level = nlohmann::json::object();
  for (const auto& [level, s] : levels) {
    if (present[level] == records.size()) per_level[std::to_string(level)] = score_metrics(s, bins);
  }
  return {{"format", "waveflow-metrics"},
          {"version", 1},
          {"orientation", "higher score = more out-of-distribution"},
          {"counts", {{"in_dist", overall.in_dist.size()}, {"ood", overall.ood.size()}}},
          {"score", score_metrics(overall, bins)},
          {"levels", per_level}};
}

}  // namespace waveflow
