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
#include "waveflow/data.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace waveflow;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

SynthConfig small_synth(std::uint64_t seed = 0) {
  SynthConfig c;
  c.image_size = 16;
  c.train_count = 6;
  c.test_in_count = 3;
  c.test_ood_count = 3;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("pgm round trip on the 8-bit grid") {
  TempDir dir("waveflow_pgm");
  Image img(3, 5);
  for (Index i = 0; i < img.size(); ++i) img.data()[i] = static_cast<double>((i * 37) % 256) / 255.0;
  save_image(img, dir.path / "a.pgm");
  const Image back = load_image(dir.path / "a.pgm");
  CHECK(back.rows() == 3);
  CHECK(back.cols() == 5);
  CHECK((back == img).all());
  CHECK(slurp(dir.path / "a.pgm").substr(0, 11) == "P5\n5 3\n255\n");

  Image off = img + 0.0015;
  off = off.min(1.0);
  save_image(off, dir.path / "b.pgm");
  CHECK((load_image(dir.path / "b.pgm") - off).abs().maxCoeff() <= 1.0 / 510.0 + 1e-12);
}

TEST_CASE("pgm header comments are skipped") {
  TempDir dir("waveflow_pgm_comment");
  write_bytes(dir.path / "c.pgm", std::string("P5\n# made by hand\n2 1\n255\n") + '\x00' + '\xff');
  const Image img = load_image(dir.path / "c.pgm");
  CHECK(img(0, 0) == 0.0);
  CHECK(img(0, 1) == 1.0);
}

TEST_CASE("pgm errors") {
  TempDir dir("waveflow_pgm_errors");
  write_bytes(dir.path / "magic.pgm", "P2\n1 1\n255\n0");
  CHECK_THROWS_WITH_AS(load_image(dir.path / "magic.pgm"), doctest::Contains("not a binary PGM"), DataError);
  write_bytes(dir.path / "depth.pgm", std::string("P5\n1 1\n65535\n") + '\x00' + '\x00');
  CHECK_THROWS_WITH_AS(load_image(dir.path / "depth.pgm"), doctest::Contains("unsupported depth"), DataError);
  write_bytes(dir.path / "short.pgm", std::string("P5\n4 4\n255\n") + "abc");
  CHECK_THROWS_WITH_AS(load_image(dir.path / "short.pgm"), doctest::Contains("truncated"), DataError);
  write_bytes(dir.path / "header.pgm", "P5\nfour 4\n255\n");
  CHECK_THROWS_WITH_AS(load_image(dir.path / "header.pgm"), doctest::Contains("malformed"), DataError);
  CHECK_THROWS_AS(load_image(dir.path / "missing.pgm"), DataError);
}

TEST_CASE("manifest round trip and validation") {
  TempDir dir("waveflow_manifest");
  DatasetManifest empty;
  write_manifest(empty, dir.path / "empty.csv");
  CHECK(slurp(dir.path / "empty.csv") == "path,label,split\n");
  CHECK(read_manifest(dir.path / "empty.csv").records.empty());

  DatasetManifest big;
  for (int i = 0; i < 1000; ++i) {
    const bool ood = i % 3 == 0;
    big.records.push_back({"img_" + std::to_string(i) + ".pgm", ood ? Label::kOod : Label::kInDist,
                           ood || i % 2 ? DatasetSplit::kTest : DatasetSplit::kTrain});
  }
  write_manifest(big, dir.path / "big.csv");
  const DatasetManifest read = read_manifest(dir.path / "big.csv");
  CHECK(read.records == big.records);
  CHECK(read.root == dir.path);
  write_manifest(read, dir.path / "big2.csv");
  CHECK(slurp(dir.path / "big.csv") == slurp(dir.path / "big2.csv"));
  CHECK(read.select(DatasetSplit::kTest, Label::kOod).size() == 334);

  DatasetManifest bad;
  bad.records.push_back({"x.pgm", Label::kOod, DatasetSplit::kTrain});
  CHECK_THROWS_WITH_AS(validate_manifest(bad), doctest::Contains("train split"), DataError);
  write_bytes(dir.path / "bad.csv", "path,label,split\nx.pgm,ood,train\n");
  CHECK_THROWS_WITH_AS(read_manifest(dir.path / "bad.csv"), doctest::Contains("train split"), DataError);
  write_bytes(dir.path / "dup.csv", "path,label,split\na.pgm,in_dist,train\na.pgm,in_dist,test\n");
  CHECK_THROWS_WITH_AS(read_manifest(dir.path / "dup.csv"), doctest::Contains("duplicate"), DataError);
  write_bytes(dir.path / "label.csv", "path,label,split\na.pgm,benign,train\n");
  CHECK_THROWS_WITH_AS(read_manifest(dir.path / "label.csv"), doctest::Contains("unknown label"), DataError);
  write_bytes(dir.path / "header.csv", "file,label,split\n");
  CHECK_THROWS_WITH_AS(read_manifest(dir.path / "header.csv"), doctest::Contains("header"), DataError);
  write_bytes(dir.path / "fields.csv", "path,label,split\na.pgm,ood\n");
  CHECK_THROWS_WITH_AS(read_manifest(dir.path / "fields.csv"), doctest::Contains("3 fields"), DataError);
}

TEST_CASE("synthetic images are quantized, bounded and deterministic") {
  const SynthConfig c = small_synth(4);
  const auto a = synthesize(c, 1);
  const auto b = synthesize(c, 3);
  REQUIRE(a.size() == 12);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK((a[i].image == b[i].image).all());
    CHECK(a[i].image.minCoeff() >= 0.0);
    CHECK(a[i].image.maxCoeff() <= 1.0);
    CHECK((a[i].image * 255.0 - (a[i].image * 255.0).round()).abs().maxCoeff() < 1e-9);
  }
  CHECK(a[0].record.split == DatasetSplit::kTrain);
  CHECK(a.back().record.label == Label::kOod);
  const auto other = synthesize(small_synth(5), 1);
  CHECK_FALSE((other[0].image == a[0].image).all());
}

TEST_CASE("generated dataset on disk is byte identical across runs") {
  TempDir dir("waveflow_synth");
  const SynthConfig c = small_synth(2);
  const DatasetManifest m1 = generate_synthetic(c, dir.path / "one", 1);
  const DatasetManifest m2 = generate_synthetic(c, dir.path / "two", 2);
  CHECK(m1.records == m2.records);
  for (const auto& r : m1.records) CHECK(slurp(dir.path / "one" / r.path) == slurp(dir.path / "two" / r.path));
  CHECK(slurp(dir.path / "one" / "manifest.csv") == slurp(dir.path / "two" / "manifest.csv"));
  CHECK(slurp(dir.path / "one" / "synth_config.json").find("\"seed\": 2") != std::string::npos);
  const DatasetManifest read = read_manifest(dir.path / "one" / "manifest.csv");
  const auto images = load_images(read, read.select(DatasetSplit::kTrain), 2);
  CHECK(images.size() == 6);
  CHECK((images[0] == synthesize(c)[0].image).all());
}

TEST_CASE("with the appearance knobs off the classes differ only in size") {
  SynthConfig c = small_synth(3);
  c.image_size = 32;
  c.ood.texture = {0, 0};
  c.ood.irregularity = {0, 0};
  c.ood.hair_max = 0;
  c.in_dist.radius = c.ood.radius;
  for (std::uint64_t i = 0; i < 5; ++i) {
    CHECK((synth_image(c, Label::kInDist, i) == synth_image(c, Label::kOod, i)).all());
  }
}

TEST_CASE("default generator separates classes at the finest scale") {
  SynthConfig c;
  c.seed = 1;
  double in = 0.0, ood = 0.0;
  const int n = 100;
  for (int i = 0; i < n; ++i) {
    in += finest_detail_energy(synth_image(c, Label::kInDist, static_cast<std::uint64_t>(i)));
    ood += finest_detail_energy(synth_image(c, Label::kOod, static_cast<std::uint64_t>(1000 + i)));
  }
  CHECK(ood >= 2.0 * in);
}

TEST_CASE("synth config validation") {
  SynthConfig c;
  c.image_size = 24;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = SynthConfig{};
  c.ood.radius = {0.3, 0.1};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = SynthConfig{};
  c.ood.hair_min = 4;
  c.ood.hair_max = 1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}
