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

#include "waveflow/data.hpp"

#include "waveflow/parallel.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace waveflow {

// ---- PGM --------------------------------------------------------------------

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in) {
  std::string token;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      if (!token.empty()) break;
    } else {
      token.push_back(static_cast<char>(c));
    }
    c = in.get();
  }
  return token;
}

long header_number(std::istream& in, const std::string& what, const std::string& file) {
  const std::string token = header_token(in);
  if (token.empty() || !std::all_of(token.begin(), token.end(), ::isdigit)) {
    throw DataError(file + ": malformed PGM header (" + what + ")");
  }
  return std::stol(token);
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image " + path.string());
  const std::string file = path.string();
  const std::string magic = header_token(in);
  if (magic != "P5") throw DataError(file + ": not a binary PGM (magic '" + magic + "', expected P5)");
  const long width = header_number(in, "width", file);
  const long height = header_number(in, "height", file);
  const long maxval = header_number(in, "maxval", file);
  if (width < 1 || height < 1) throw DataError(file + ": empty image");
  if (maxval != 255) {
    throw DataError(file + ": unsupported depth (maxval " + std::to_string(maxval) +
                    ", only 255 is supported)");
  }
  std::vector<unsigned char> bytes(static_cast<std::size_t>(width * height));
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw DataError(file + ": truncated pixel data (" + std::to_string(in.gcount()) + " of " +
                    std::to_string(bytes.size()) + " bytes)");
  }
  Image image(height, width);
  for (std::size_t i = 0; i < bytes.size(); ++i) image.data()[i] = bytes[i] / 255.0;
  return image;
}

void save_image(const Image& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write image " + path.string());
  out << "P5\n" << image.cols() << ' ' << image.rows() << "\n255\n";
  std::vector<unsigned char> bytes(static_cast<std::size_t>(image.size()));
  for (Index i = 0; i < image.size(); ++i) {
    const double v = std::clamp(image.data()[i], 0.0, 1.0);
    bytes[static_cast<std::size_t>(i)] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

Image quantize8(const Image& image) {
  return image.unaryExpr([](double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; });
}

// ---- manifest ---------------------------------------------------------------

std::string to_string(Label label) { return label == Label::kInDist ? "in_dist" : "ood"; }
std::string to_string(DatasetSplit split) { return split == DatasetSplit::kTrain ? "train" : "test"; }

Label parse_label(const std::string& text) {
  if (text == "in_dist") return Label::kInDist;
  if (text == "ood") return Label::kOod;
  throw DataError("unknown label '" + text + "' (expected in_dist or ood)");
}

DatasetSplit parse_split(const std::string& text) {
  if (text == "train") return DatasetSplit::kTrain;
  if (text == "test") return DatasetSplit::kTest;
  throw DataError("unknown split '" + text + "' (expected train or test)");
}

std::vector<ManifestRecord> DatasetManifest::select(DatasetSplit split) const {
  std::vector<ManifestRecord> out;
  for (const auto& r : records) {
    if (r.split == split) out.push_back(r);
  }
  return out;
}

std::vector<ManifestRecord> DatasetManifest::select(DatasetSplit split, Label label) const {
  std::vector<ManifestRecord> out;
  for (const auto& r : records) {
    if (r.split == split && r.label == label) out.push_back(r);
  }
  return out;
}

void validate_manifest(const DatasetManifest& manifest) {
  std::set<std::string> seen;
  for (const auto& r : manifest.records) {
    if (r.path.empty()) throw DataError("manifest: empty path");
    if (!seen.insert(r.path).second) throw DataError("manifest: duplicate path " + r.path);
    if (r.split == DatasetSplit::kTrain && r.label == Label::kOod) {
      throw DataError("manifest: ood record " + r.path + " in train split");
    }
  }
}

namespace {
constexpr const char* kManifestHeader = "path,label,split";
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kManifestHeader) {
    throw DataError("manifest " + path.string() + ": expected header '" +
                    std::string(kManifestHeader) + "'");
  }
  DatasetManifest manifest;
  manifest.root = path.parent_path();
  int number = 1;
  while (std::getline(in, line)) {
    ++number;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 3) {
      throw DataError("manifest " + path.string() + ": line " + std::to_string(number) +
                      " does not have 3 fields");
    }
    manifest.records.push_back({fields[0], parse_label(fields[1]), parse_split(fields[2])});
  }
  validate_manifest(manifest);
  return manifest;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  validate_manifest(manifest);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << kManifestHeader << '\n';
  for (const auto& r : manifest.records) {
    if (r.path.find_first_of(",\n") != std::string::npos) {
      throw DataError("manifest: path " + r.path + " contains a separator");
    }
    out << r.path << ',' << to_string(r.label) << ',' << to_string(r.split) << '\n';
  }
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<Image> load_images(const DatasetManifest& manifest,
                               const std::vector<ManifestRecord>& records, int threads) {
  std::vector<Image> images(records.size());
  parallel_chunks(records.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) images[i] = load_image(manifest.root / records[i].path);
  });
  return images;
}

// ---- synthetic generator -----------------------------------------------------

void SynthConfig::validate() const {
  auto range = [](const Range& r, const char* name, double lo, double hi) {
    if (!(r.min <= r.max) || r.min < lo || r.max > hi) {
      throw std::invalid_argument(std::string("synth: invalid ") + name + " range");
    }
  };
  if (image_size < 4 || !is_power_of_two(image_size)) {
    throw std::invalid_argument("synth: image size must be a power of two >= 4");
  }
  if (train_count < 0 || test_in_count < 0 || test_ood_count < 0) {
    throw std::invalid_argument("synth: counts must be non-negative");
  }
  for (const LesionStyle* s : {&in_dist, &ood}) {
    range(s->radius, "radius", 0.0, 1.0);
    range(s->texture, "texture", 0.0, 1.0);
    range(s->irregularity, "irregularity", 0.0, 0.9);
    if (s->hair_min < 0 || s->hair_min > s->hair_max) {
      throw std::invalid_argument("synth: invalid hair count range");
    }
  }
  range(contrast, "contrast", 0.0, 1.0);
  range(background, "background", 0.0, 1.0);
  range(gradient, "gradient", -1.0, 1.0);
  range(noise, "noise", 0.0, 1.0);
  range(grain, "grain", 0.0, 1.0);
  if (!(edge_softness > 0.0)) throw std::invalid_argument("synth: edge softness must be positive");
}

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

double uniform(std::mt19937_64& rng, const Range& r) {
  if (r.min == r.max) return r.min;
  return std::uniform_real_distribution<double>(r.min, r.max)(rng);
}

struct Wave {
  double kx, ky, phase, amplitude;
};

struct Stroke {
  std::array<double, 2> p0, p1, p2;
  double width, darkness;
};

double bezier_distance(const Stroke& s, double x, double y) {
  double best = 1e300;
  constexpr int kSteps = 48;
  for (int i = 0; i <= kSteps; ++i) {
    const double t = static_cast<double>(i) / kSteps;
    const double a = (1 - t) * (1 - t), b = 2 * (1 - t) * t, c = t * t;
    const double px = a * s.p0[0] + b * s.p1[0] + c * s.p2[0];
    const double py = a * s.p0[1] + b * s.p1[1] + c * s.p2[1];
    best = std::min(best, (px - x) * (px - x) + (py - y) * (py - y));
  }
  return std::sqrt(best);
}

}  // namespace

Image synth_image(const SynthConfig& config, Label label, std::uint64_t stream) {
  std::mt19937_64 rng(derive_seed(config.seed, stream));
  const LesionStyle& style = label == Label::kInDist ? config.in_dist : config.ood;
  const double size = static_cast<double>(config.image_size);
  const Range unit{0.0, 1.0};
  const Range centre{0.5 - 0.1, 0.5 + 0.1};

  const double bg = uniform(rng, config.background);
  const double gx = uniform(rng, config.gradient), gy = uniform(rng, config.gradient);
  const double cx = uniform(rng, centre) * size, cy = uniform(rng, centre) * size;
  const double radius = uniform(rng, style.radius) * size;
  const double contrast = uniform(rng, config.contrast);
  const double shading = uniform(rng, Range{0.0, 0.3});
  const double sigma = uniform(rng, config.noise);
  const double grain = uniform(rng, config.grain);

  // Border: r(theta) = radius * (1 + irr * sum_k a_k sin(k theta + phi_k)).
  const double irregularity = uniform(rng, style.irregularity);
  std::array<std::pair<double, double>, 4> lobes{};
  double lobe_norm = 0.0;
  for (auto& [amp, phase] : lobes) {
    amp = uniform(rng, unit);
    phase = uniform(rng, Range{0.0, kTau});
    lobe_norm += amp;
  }
  for (auto& lobe : lobes) lobe.first /= std::max(lobe_norm, 1e-12);

  // Band-limited texture: random plane waves with 3 to 8 pixel wavelengths.
  const double texture = uniform(rng, style.texture);
  std::vector<Wave> waves(8);
  for (Wave& w : waves) {
    const double wavelength = uniform(rng, Range{3.0, 8.0}) * size / 32.0;
    const double angle = uniform(rng, Range{0.0, kTau});
    w.kx = kTau / wavelength * std::cos(angle);
    w.ky = kTau / wavelength * std::sin(angle);
    w.phase = uniform(rng, Range{0.0, kTau});
    w.amplitude = uniform(rng, Range{0.5, 1.0});
  }
  double wave_norm = 0.0;
  for (const Wave& w : waves) wave_norm += w.amplitude * w.amplitude;
  wave_norm = std::sqrt(wave_norm / 2.0);

  const int hairs =
      std::uniform_int_distribution<int>(style.hair_min, style.hair_max)(rng);
  std::vector<Stroke> strokes(static_cast<std::size_t>(hairs));
  for (Stroke& s : strokes) {
    const double a0 = uniform(rng, Range{0.0, kTau});
    const double a1 = a0 + uniform(rng, Range{2.0, 4.3});
    const double reach = 0.6 * size;
    s.p0 = {size / 2 + reach * std::cos(a0), size / 2 + reach * std::sin(a0)};
    s.p2 = {size / 2 + reach * std::cos(a1), size / 2 + reach * std::sin(a1)};
    s.p1 = {uniform(rng, Range{0.2, 0.8}) * size, uniform(rng, Range{0.2, 0.8}) * size};
    s.width = uniform(rng, Range{0.4, 0.8}) * size / 32.0;
    s.darkness = uniform(rng, Range{0.25, 0.5});
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  Image image(config.image_size, config.image_size);
  for (Index y = 0; y < image.rows(); ++y) {
    for (Index x = 0; x < image.cols(); ++x) {
      const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
      const double dx = px - cx, dy = py - cy;
      double v = bg + gx * (px / size - 0.5) + gy * (py / size - 0.5);
      const double theta = std::atan2(dy, dx);
      double border = 1.0;
      for (std::size_t k = 0; k < lobes.size(); ++k) {
        border += irregularity * lobes[k].first *
                  std::sin(static_cast<double>(k + 3) * theta + lobes[k].second);
      }
      const double r = radius * border;
      const double d = std::sqrt(dx * dx + dy * dy);
      const double width = std::max(config.edge_softness * radius, 0.5);
      const double inside = 0.5 * (1.0 - std::tanh((d - r) / width));
      double lesion = contrast * (1.0 - shading * std::min(d / r, 1.0) * std::min(d / r, 1.0));
      if (texture > 0.0) {
        double t = 0.0;
        for (const Wave& w : waves) t += w.amplitude * std::sin(w.kx * px + w.ky * py + w.phase);
        lesion += texture * t / wave_norm;
      }
      v -= inside * lesion;
      for (const Stroke& s : strokes) {
        const double dist = bezier_distance(s, px, py);
        v -= s.darkness * std::exp(-0.5 * (dist / s.width) * (dist / s.width));
      }
      image(y, x) = v;
    }
  }
  if (sigma > 0.0) {
    for (Index i = 0; i < image.size(); ++i) image.data()[i] += sigma * normal(rng);
  }
  if (grain > 0.0) {
    // White finest-level detail coefficients: texture with no coarse energy.
    const Index half = config.image_size / 2;
    HaarLevel<double> level;
    level.low = Image::Zero(half, half);
    for (auto& d : level.detail) {
      d.resize(half, half);
      for (Index i = 0; i < d.size(); ++i) d.data()[i] = grain * normal(rng);
    }
    image += haar_inverse(level);
  }
  return quantize8(image);
}

std::vector<SynthRecord> synthesize(const SynthConfig& config, int threads) {
  config.validate();
  std::vector<SynthRecord> out;
  auto add = [&](int count, Label label, DatasetSplit split, const std::string& stem) {
    for (int i = 0; i < count; ++i) {
      char name[64];
      std::snprintf(name, sizeof(name), "images/%s_%05d.pgm", stem.c_str(), i);
      out.push_back({ManifestRecord{name, label, split}, Image()});
    }
  };
  add(config.train_count, Label::kInDist, DatasetSplit::kTrain, "train_in");
  add(config.test_in_count, Label::kInDist, DatasetSplit::kTest, "test_in");
  add(config.test_ood_count, Label::kOod, DatasetSplit::kTest, "test_ood");
  parallel_chunks(out.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      out[i].image = synth_image(config, out[i].record.label, static_cast<std::uint64_t>(i));
    }
  });
  return out;
}

std::string synth_config_json(const SynthConfig& c) {
  auto range = [](const Range& r) { return nlohmann::json::array({r.min, r.max}); };
  auto style = [&](const LesionStyle& s) {
    return nlohmann::json{{"radius", range(s.radius)},
                          {"texture", range(s.texture)},
                          {"irregularity", range(s.irregularity)},
                          {"hair", nlohmann::json::array({s.hair_min, s.hair_max})}};
  };
  nlohmann::json j{{"format", "waveflow-synth"},
                   {"version", 1},
                   {"image_size", c.image_size},
                   {"train_count", c.train_count},
                   {"test_in_count", c.test_in_count},
                   {"test_ood_count", c.test_ood_count},
                   {"in_dist", style(c.in_dist)},
                   {"ood", style(c.ood)},
                   {"contrast", range(c.contrast)},
                   {"background", range(c.background)},
                   {"gradient", range(c.gradient)},
                   {"noise", range(c.noise)},
                   {"grain", range(c.grain)},
                   {"edge_softness", c.edge_softness},
                   {"seed", c.seed}};
  return j.dump(2) + "\n";
}

DatasetManifest generate_synthetic(const SynthConfig& config,
                                   const std::filesystem::path& out_dir, int threads) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw DataError("cannot create " + (out_dir / "images").string() + ": " + ec.message());
  const std::vector<SynthRecord> records = synthesize(config, threads);
  DatasetManifest manifest;
  manifest.root = out_dir;
  for (const auto& r : records) manifest.records.push_back(r.record);
  parallel_chunks(records.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) save_image(records[i].image, out_dir / records[i].record.path);
  });
  write_manifest(manifest, out_dir / "manifest.csv");
  std::ofstream echo(out_dir / "synth_config.json", std::ios::binary);
  echo << synth_config_json(config);
  if (!echo) throw DataError("cannot write " + (out_dir / "synth_config.json").string());
  return manifest;
}

double finest_detail_energy(const Image& image) {
  const HaarLevel<double> level = haar_forward(image);
  double total = 0.0;
  for (const auto& d : level.detail) total += d.square().sum();
  return total / static_cast<double>(3 * level.low.size());
}

}  // namespace waveflow
