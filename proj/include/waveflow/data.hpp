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

// Grayscale image I/O (binary PGM), dataset manifests and the synthetic
// lesion-analog generator.

#include "waveflow/augment.hpp"
#include "waveflow/haar.hpp"
#include "waveflow/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace waveflow {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- PGM --------------------------------------------------------------------

// Reads an 8-bit binary graymap (P5, maxval 255); pixel k maps to k / 255.
Image load_image(const std::filesystem::path& path);
// Writes values rounded to the nearest k / 255 after clamping to [0, 1].
void save_image(const Image& image, const std::filesystem::path& path);
// Rounds every value to the 8-bit grid.
Image quantize8(const Image& image);

// ---- manifest ---------------------------------------------------------------

enum class Label { kInDist, kOod };
enum class DatasetSplit { kTrain, kTest };

std::string to_string(Label label);
std::string to_string(DatasetSplit split);
Label parse_label(const std::string& text);
DatasetSplit parse_split(const std::string& text);

struct ManifestRecord {
  std::string path;  // relative to the manifest's directory
  Label label = Label::kInDist;
  DatasetSplit split = DatasetSplit::kTrain;

  bool operator==(const ManifestRecord&) const = default;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestRecord> records;

  std::vector<ManifestRecord> select(DatasetSplit split) const;
  std::vector<ManifestRecord> select(DatasetSplit split, Label label) const;
};

// Throws DataError for duplicate paths or ood records in the train split.
void validate_manifest(const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

std::vector<Image> load_images(const DatasetManifest& manifest,
                               const std::vector<ManifestRecord>& records,
                               int threads = 1);

// ---- synthetic generator -----------------------------------------------------

// Appearance knobs for one class. Radii are fractions of the image size.
struct LesionStyle {
  Range radius{0.08, 0.16};
  Range texture{0.0, 0.0};       // band-limited texture amplitude
  Range irregularity{0.0, 0.0};  // relative radial border perturbation
  int hair_min = 0;
  int hair_max = 0;
};

struct SynthConfig {
  Index image_size = 32;
  int train_count = 240;     // in-dist, train split
  int test_in_count = 100;
  int test_ood_count = 100;
  LesionStyle in_dist{};
  LesionStyle ood{{0.18, 0.3}, {0.03, 0.07}, {0.1, 0.25}, 0, 3};
  Range contrast{0.08, 0.8};     // lesion darkening
  Range background{0.55, 0.8};
  Range gradient{-0.15, 0.15};   // background slope across the frame
  Range noise{0.0, 0.03};        // per-image white sensor noise deviation
  Range grain{0.0, 0.04};        // per-image finest-scale grain deviation
  double edge_softness = 0.06;   // border width as a fraction of the radius
  std::uint64_t seed = 0;

  void validate() const;
};

// One quantized image; `stream` selects the per-image RNG stream.
Image synth_image(const SynthConfig& config, Label label, std::uint64_t stream);

struct SynthRecord {
  ManifestRecord record;
  Image image;
};

// In-memory dataset in manifest order: train, test in_dist, test ood.
std::vector<SynthRecord> synthesize(const SynthConfig& config, int threads = 1);

// Writes images/ *.pgm, manifest.csv and synth_config.json under out_dir.
DatasetManifest generate_synthetic(const SynthConfig& config,
                                   const std::filesystem::path& out_dir,
                                   int threads = 1);

std::string synth_config_json(const SynthConfig& config);

// Mean squared finest-level detail coefficient.
double finest_detail_energy(const Image& image);

}  // namespace waveflow
