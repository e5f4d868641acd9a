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

// Threshold-free OOD evaluation. Scores are oriented so that higher means
// more out-of-distribution; the ood class is the positive class.

#include "waveflow/data.hpp"
#include "waveflow/haar.hpp"

#include "json.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace waveflow {

struct ScoreSet {
  std::vector<double> in_dist;
  std::vector<double> ood;
};

// P(ood > in) + P(tie) / 2 via midranks. Throws on empty or non-finite input.
double auc(const ScoreSet& scores);

struct RocCurve {
  std::vector<std::pair<double, double>> points;  // (fpr, tpr)
  double auc = 0.0;
};

// Thresholds sweep the distinct pooled scores in descending order.
RocCurve roc_points(const ScoreSet& scores);
double trapezoid_area(const std::vector<std::pair<double, double>>& points);

struct Histogram {
  std::vector<double> edges;  // bins + 1 ascending edges
  std::vector<int> in_dist;
  std::vector<int> ood;
};

Histogram histogram(const ScoreSet& scores, int bins);

struct MagnitudeScore {
  std::map<int, double> per_level;  // mean |detail|, coarse-first levels
  std::vector<int> scoring_levels;
  double averaged = 0.0;
};

// Levels with at least 4x4 detail coefficients are averaged.
MagnitudeScore wavelet_magnitude_score(const Image& image, std::optional<int> depth = {});

// One scored image. level_scores holds per-level bpd for flows or per-level
// magnitudes for the baseline.
struct ScoreRecord {
  std::string path;
  Label label = Label::kInDist;
  DatasetSplit split = DatasetSplit::kTest;
  double score = 0.0;
  std::map<int, double> level_scores;
};

nlohmann::json to_json(const ScoreRecord& record);
ScoreRecord score_record_from_json(const nlohmann::json& j);
void write_score_records(const std::vector<ScoreRecord>& records, const std::filesystem::path& path);
std::vector<ScoreRecord> read_score_records(const std::filesystem::path& path);

// AUC/ROC/histogram for the overall score and every level present in all
// records. Throws on an empty record set or a class with no scores.
nlohmann::json evaluate_records(const std::vector<ScoreRecord>& records, int bins = 20);

}  // namespace waveflow
