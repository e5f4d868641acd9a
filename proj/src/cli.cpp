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

#include "waveflow/cli.hpp"

#include "waveflow/checkpoint.hpp"
#include "waveflow/eval.hpp"
#include "waveflow/parallel.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

namespace waveflow {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- settings ----------------------------------------------------------------

WaveletFlowConfig ModelSettings::waveletflow() const {
  WaveletFlowConfig c;
  c.image_size = image_size;
  c.depth = depth;
  c.steps = steps;
  c.level_steps = level_steps;
  c.mask = mask;
  c.hidden = hidden;
  c.seed = seed;
  return c;
}

GlowConfig ModelSettings::glow() const {
  GlowConfig c;
  c.steps = steps;
  c.scales = scales;
  c.input_shape = Shape{1, image_size, image_size};
  c.mask = mask;
  c.hidden = hidden;
  c.seed = seed;
  return c;
}

fs::path RunConfig::resolve(const fs::path& p) const {
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

fs::path RunConfig::manifest_path() const {
  return manifest.empty() ? resolve(out_dir) / "dataset" / "manifest.csv" : resolve(manifest);
}

fs::path RunConfig::checkpoint_path() const {
  return checkpoint.empty() ? resolve(out_dir) / "checkpoint.json" : resolve(checkpoint);
}

fs::path RunConfig::scores_path() const {
  return scores.empty() ? resolve(out_dir) / "scores.jsonl" : resolve(scores);
}

// ---- INI schema ----------------------------------------------------------------

namespace {

template <class T>
T parse_number(const std::string& text, const std::string& key) {
  T value{};
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("invalid value '" + text + "' for " + key);
  }
  return value;
}

bool parse_bool(const std::string& text, const std::string& key) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("invalid boolean '" + text + "' for " + key);
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T, class Ref>
Field num(std::string section, std::string key, Ref ref) {
  return Field{section, key,
               [ref](RunConfig& c, const std::string& v, const std::string& name) {
                 ref(c) = parse_number<T>(v, name);
               },
               [ref](const RunConfig& c) {
                 if constexpr (std::is_floating_point_v<T>) {
                   return format_double(ref(c));
                 } else {
                   return std::to_string(ref(c));
                 }
               }};
}

template <class Ref>
Field flag(std::string section, std::string key, Ref ref) {
  return Field{section, key,
               [ref](RunConfig& c, const std::string& v, const std::string& name) {
                 ref(c) = parse_bool(v, name);
               },
               [ref](const RunConfig& c) {
                 return std::string(ref(c) ? "true" : "false");
               }};
}

template <class Ref>
Field path_field(std::string section, std::string key, Ref ref) {
  return Field{section, key,
               [ref](RunConfig& c, const std::string& v, const std::string&) { ref(c) = v; },
               [ref](const RunConfig& c) { return ref(c).string(); }};
}

template <class Ref>
void range_fields(std::vector<Field>& out, const std::string& section,
                  const std::string& prefix, Ref ref) {
  out.push_back(num<double>(section, prefix + "_min", [ref](auto& c) -> auto& { return ref(c).min; }));
  out.push_back(num<double>(section, prefix + "_max", [ref](auto& c) -> auto& { return ref(c).max; }));
}

void style_fields(std::vector<Field>& out, const std::string& section,
                  LesionStyle SynthConfig::*member) {
  auto style = [member](auto& c) -> auto& { return c.synth.*member; };
  range_fields(out, section, "radius", [style](auto& c) -> auto& { return style(c).radius; });
  range_fields(out, section, "texture", [style](auto& c) -> auto& { return style(c).texture; });
  range_fields(out, section, "irregularity",
               [style](auto& c) -> auto& { return style(c).irregularity; });
  out.push_back(num<int>(section, "hair_min", [style](auto& c) -> auto& { return style(c).hair_min; }));
  out.push_back(num<int>(section, "hair_max", [style](auto& c) -> auto& { return style(c).hair_max; }));
}

std::string level_steps_string(const std::map<int, int>& steps) {
  std::string out;
  for (const auto& [level, k] : steps) {
    if (!out.empty()) out += ' ';
    out += std::to_string(level) + ':' + std::to_string(k);
  }
  return out;
}

std::map<int, int> parse_level_steps(const std::string& text, const std::string& key) {
  std::map<int, int> out;
  std::stringstream ss(text);
  std::string item;
  while (ss >> item) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("invalid entry '" + item + "' for " + key + " (expected level:steps)");
    out[parse_number<int>(item.substr(0, colon), key)] = parse_number<int>(item.substr(colon + 1), key);
  }
  return out;
}

// Seeds not set explicitly follow the run seed.
struct SeedFlags {
  bool synth = false, model = false, train = false;
};

const std::vector<Field>& schema() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f;
    f.push_back(path_field("run", "out", [](auto& c) -> auto& { return c.out_dir; }));
    f.push_back(num<std::uint64_t>("run", "seed", [](auto& c) -> auto& { return c.seed; }));
    f.push_back(num<int>("run", "threads", [](auto& c) -> auto& { return c.threads; }));
    f.push_back(path_field("data", "manifest", [](auto& c) -> auto& { return c.manifest; }));

    f.push_back(num<Index>("synth", "image_size", [](auto& c) -> auto& { return c.synth.image_size; }));
    f.push_back(num<int>("synth", "train_count", [](auto& c) -> auto& { return c.synth.train_count; }));
    f.push_back(num<int>("synth", "test_in_count", [](auto& c) -> auto& { return c.synth.test_in_count; }));
    f.push_back(num<int>("synth", "test_ood_count", [](auto& c) -> auto& { return c.synth.test_ood_count; }));
    range_fields(f, "synth", "contrast", [](auto& c) -> auto& { return c.synth.contrast; });
    range_fields(f, "synth", "background", [](auto& c) -> auto& { return c.synth.background; });
    range_fields(f, "synth", "gradient", [](auto& c) -> auto& { return c.synth.gradient; });
    range_fields(f, "synth", "noise", [](auto& c) -> auto& { return c.synth.noise; });
    range_fields(f, "synth", "grain", [](auto& c) -> auto& { return c.synth.grain; });
    f.push_back(num<double>("synth", "edge_softness", [](auto& c) -> auto& { return c.synth.edge_softness; }));
    f.push_back(num<std::uint64_t>("synth", "seed", [](auto& c) -> auto& { return c.synth.seed; }));
    style_fields(f, "synth_in_dist", &SynthConfig::in_dist);
    style_fields(f, "synth_ood", &SynthConfig::ood);

    f.push_back(Field{"model", "family",
                      [](RunConfig& c, const std::string& v, const std::string& key) {
                        if (v == "glow") {
                          c.model.family = ModelFamily::kGlow;
                        } else if (v == "waveletflow") {
                          c.model.family = ModelFamily::kWaveletFlow;
                        } else {
                          throw ConfigError("invalid value '" + v + "' for " + key + " (expected glow or waveletflow)");
                        }
                      },
                      [](const RunConfig& c) {
                        return std::string(c.model.family == ModelFamily::kGlow ? "glow" : "waveletflow");
                      }});
    f.push_back(num<Index>("model", "image_size", [](auto& c) -> auto& { return c.model.image_size; }));
    f.push_back(Field{"model", "depth",
                      [](RunConfig& c, const std::string& v, const std::string& key) {
                        if (v == "auto") {
                          c.model.depth.reset();
                        } else {
                          c.model.depth = parse_number<int>(v, key);
                        }
                      },
                      [](const RunConfig& c) {
                        return c.model.depth ? std::to_string(*c.model.depth) : std::string("auto");
                      }});
    f.push_back(num<int>("model", "steps", [](auto& c) -> auto& { return c.model.steps; }));
    f.push_back(num<int>("model", "scales", [](auto& c) -> auto& { return c.model.scales; }));
    f.push_back(Field{"model", "level_steps",
                      [](RunConfig& c, const std::string& v, const std::string& key) {
                        c.model.level_steps = parse_level_steps(v, key);
                      },
                      [](const RunConfig& c) { return level_steps_string(c.model.level_steps); }});
    f.push_back(Field{"model", "mask",
                      [](RunConfig& c, const std::string& v, const std::string& key) {
                        try {
                          c.model.mask = parse_mask_strategy(v);
                        } catch (const std::exception&) {
                          throw ConfigError("invalid value '" + v + "' for " + key);
                        }
                      },
                      [](const RunConfig& c) { return to_string(c.model.mask); }});
    f.push_back(num<Index>("model", "hidden", [](auto& c) -> auto& { return c.model.hidden; }));
    f.push_back(num<std::uint64_t>("model", "seed", [](auto& c) -> auto& { return c.model.seed; }));

    f.push_back(num<double>("train", "learning_rate", [](auto& c) -> auto& { return c.train.learning_rate; }));
    f.push_back(num<int>("train", "batch_size", [](auto& c) -> auto& { return c.train.batch_size; }));
    f.push_back(num<int>("train", "max_epochs", [](auto& c) -> auto& { return c.train.max_epochs; }));
    f.push_back(num<int>("train", "patience", [](auto& c) -> auto& { return c.train.patience; }));
    f.push_back(flag("train", "dequantize", [](auto& c) -> auto& { return c.train.dequantize; }));
    f.push_back(num<std::uint64_t>("train", "seed", [](auto& c) -> auto& { return c.train.seed; }));

    f.push_back(flag("augment", "enabled", [](auto& c) -> auto& { return c.train.augmentation.enabled; }));
    range_fields(f, "augment", "rotation", [](auto& c) -> auto& { return c.train.augmentation.rotation_degrees; });
    range_fields(f, "augment", "translation", [](auto& c) -> auto& { return c.train.augmentation.translation; });
    range_fields(f, "augment", "scaling", [](auto& c) -> auto& { return c.train.augmentation.scaling; });
    range_fields(f, "augment", "shear", [](auto& c) -> auto& { return c.train.augmentation.shear_degrees; });

    f.push_back(path_field("score", "checkpoint", [](auto& c) -> auto& { return c.checkpoint; }));
    f.push_back(Field{"score", "split",
                      [](RunConfig& c, const std::string& v, const std::string& key) {
                        try {
                          c.score_split = parse_split(v);
                        } catch (const DataError&) {
                          throw ConfigError("invalid value '" + v + "' for " + key + " (expected train or test)");
                        }
                      },
                      [](const RunConfig& c) { return to_string(c.score_split); }});
    f.push_back(path_field("eval", "scores", [](auto& c) -> auto& { return c.scores; }));
    f.push_back(num<int>("eval", "bins", [](auto& c) -> auto& { return c.bins; }));
    f.push_back(num<int>("sample", "count", [](auto& c) -> auto& { return c.sample_count; }));
    f.push_back(num<double>("sample", "temperature", [](auto& c) -> auto& { return c.temperature; }));
    return f;
  }();
  return fields;
}

void validate(const RunConfig& c) {
  auto check = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  check(c.threads >= 1, "[run] threads must be at least 1");
  check(c.model.steps >= 1, "[model] steps must be at least 1");
  check(c.model.scales >= 1, "[model] scales must be at least 1");
  check(c.model.hidden >= 1, "[model] hidden must be at least 1");
  check(c.model.image_size >= 4 && is_power_of_two(c.model.image_size),
        "[model] image_size must be a power of two >= 4");
  for (const auto& [level, k] : c.model.level_steps) {
    check(level >= 0 && k >= 1, "[model] level_steps entries need level >= 0 and steps >= 1");
  }
  check(c.bins >= 1, "[eval] bins must be at least 1");
  check(c.sample_count >= 1, "[sample] count must be at least 1");
  check(c.temperature > 0.0, "[sample] temperature must be positive");
  try {
    c.train.validate();
    c.synth.validate();
    if (c.model.family == ModelFamily::kWaveletFlow) {
      const int depth = c.model.waveletflow().resolved_depth();
      check(depth >= 1 && depth <= log2_size(c.model.image_size), "[model] depth out of range");
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const auto& a = c.train.augmentation;
  for (const Range* r : {&a.rotation_degrees, &a.translation, &a.scaling, &a.shear_degrees}) {
    check(r->min <= r->max, "[augment] range minimum exceeds maximum");
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& ini_text, const fs::path& base_dir,
                           const CliOverrides& overrides) {
  boost::property_tree::ptree tree;
  std::istringstream in(ini_text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.message() + " (line " +
                      std::to_string(e.line()) + ")");
  }
  RunConfig config;
  config.base_dir = base_dir;
  SeedFlags explicit_seed;
  for (const auto& [section, keys] : tree) {
    if (keys.empty() && !keys.data().empty()) {
      throw ConfigError("key '" + section + "' is outside any section");
    }
    for (const auto& [key, value] : keys) {
      const std::string name = "[" + section + "] " + key;
      const auto& fields = schema();
      const auto it = std::find_if(fields.begin(), fields.end(), [&](const Field& f) {
        return f.section == section && f.key == key;
      });
      if (it == fields.end()) throw ConfigError("unknown key " + name);
      it->set(config, value.data(), name);
      if (key == "seed") {
        if (section == "synth") explicit_seed.synth = true;
        if (section == "model") explicit_seed.model = true;
        if (section == "train") explicit_seed.train = true;
      }
    }
  }
  if (overrides.out_dir) config.out_dir = *overrides.out_dir;
  if (overrides.threads) config.threads = *overrides.threads;
  if (overrides.seed) {
    config.seed = *overrides.seed;
    explicit_seed = SeedFlags{};
  }
  if (!explicit_seed.synth) config.synth.seed = config.seed;
  if (!explicit_seed.model) config.model.seed = config.seed;
  if (!explicit_seed.train) config.train.seed = config.seed;
  validate(config);
  return config;
}

RunConfig load_run_config(const fs::path& path, const CliOverrides& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), fs::absolute(path).parent_path(), overrides);
}

std::string resolved_config_ini(const RunConfig& unresolved) {
  RunConfig config = unresolved;
  config.out_dir = unresolved.resolve(unresolved.out_dir);
  config.manifest = unresolved.manifest_path();
  config.checkpoint = unresolved.checkpoint_path();
  config.scores = unresolved.scores_path();
  std::string out;
  std::string section;
  for (const Field& f : schema()) {
    if (f.section != section) {
      if (!section.empty()) out += '\n';
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += f.key + " = " + f.get(config) + "\n";
  }
  return out;
}

// ---- commands ------------------------------------------------------------------

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

void write_provenance(const RunConfig& config, const fs::path& dir) {
  fs::create_directories(dir);
  write_file(dir / "resolved_config.ini", resolved_config_ini(config));
  const json versions{{"waveflow", kVersion},
                      {"checkpoint", kCheckpointVersion},
                      {"manifest", 1},
                      {"scores", 1},
                      {"metrics", 1},
                      {"history", 1},
                      {"synth", 1}};
  write_file(dir / "versions.json", versions.dump(2) + "\n");
}

fs::path out_dir(const RunConfig& config) {
  const fs::path dir = config.resolve(config.out_dir);
  fs::create_directories(dir);
  return dir;
}

DatasetManifest open_manifest(const RunConfig& config) {
  const fs::path path = config.manifest_path();
  if (!fs::exists(path)) throw DataError("missing manifest " + path.string());
  return read_manifest(path);
}

std::vector<Image> load_checked(const RunConfig& config, const DatasetManifest& manifest,
                                const std::vector<ManifestRecord>& records) {
  std::vector<Image> images = load_images(manifest, records, config.threads);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].rows() != config.model.image_size || images[i].cols() != config.model.image_size) {
      throw DataError(records[i].path + ": image is " + std::to_string(images[i].rows()) + "x" +
                      std::to_string(images[i].cols()) + ", model expects " +
                      std::to_string(config.model.image_size));
    }
  }
  return images;
}

json history_line(const std::string& component, const EpochRecord& e) {
  return {{"component", component},
          {"epoch", e.epoch},
          {"nll", e.nll},
          {"bpd", e.bpd},
          {"wall_seconds", e.wall_seconds}};
}

json summary_entry(const TrainResult& r) {
  return {{"best_epoch", r.best_epoch},
          {"best_nll", r.best_nll},
          {"epochs_run", static_cast<int>(r.history.size()) - 1},
          {"stopped_early", r.stopped_early},
          {"aborted", r.aborted},
          {"warnings", r.warnings}};
}

std::string family_name(ModelFamily f) { return f == ModelFamily::kGlow ? "glow" : "waveletflow"; }

json load_matching_checkpoint(const RunConfig& config) {
  const fs::path path = config.checkpoint_path();
  if (!fs::exists(path)) throw DataError("missing checkpoint " + path.string());
  json j = read_checkpoint(path);
  const std::string family = j.value("family", std::string());
  if (family != family_name(config.model.family)) {
    throw CheckpointError("checkpoint mismatch: checkpoint family '" + family +
                          "' but config family '" + family_name(config.model.family) + "'");
  }
  const json expected = config.model.family == ModelFamily::kGlow
                            ? glow_config_json(config.model.glow())
                            : waveletflow_config_json(config.model.waveletflow());
  if (j.value("architecture", json()) != expected) {
    throw CheckpointError("checkpoint mismatch: architecture differs from [model] settings");
  }
  return j;
}

Image prepare(const RunConfig& config, const Image& image) {
  return dequantize_midpoint(image, config.train.dequantize);
}

}  // namespace

void cmd_synth(const RunConfig& config) {
  const fs::path dir = config.manifest_path().parent_path();
  generate_synthetic(config.synth, dir, config.threads);
  if (config.manifest_path().filename() != "manifest.csv") {
    fs::rename(dir / "manifest.csv", config.manifest_path());
  }
  write_provenance(config, dir);
}

void cmd_train(const RunConfig& config) {
  const DatasetManifest manifest = open_manifest(config);
  const auto records = manifest.select(DatasetSplit::kTrain);
  if (records.empty()) throw DataError("manifest has no train records");
  const std::vector<Image> images = load_checked(config, manifest, records);
  const fs::path dir = out_dir(config);
  std::string history;
  json summary = json::object();
  if (config.model.family == ModelFamily::kWaveletFlow) {
    WaveletFlowModel model = build_waveletflow(config.model.waveletflow());
    const WaveletTrainResult result = train_waveletflow(model, images, config.train, config.threads);
    for (const auto& [level, r] : result.levels) {
      const std::string name = level == 0 ? "base" : "level" + std::to_string(level);
      for (const auto& e : r.history) history += history_line(name, e).dump() + "\n";
      summary[name] = summary_entry(r);
    }
    save_checkpoint(model, config.checkpoint_path());
  } else {
    FlowModel model = build_glow(config.model.glow());
    const TrainResult r = train_glow(model, images, config.train);
    for (const auto& e : r.history) history += history_line("glow", e).dump() + "\n";
    summary["glow"] = summary_entry(r);
    save_checkpoint(model, config.checkpoint_path());
  }
  write_file(dir / "history.jsonl", history);
  write_file(dir / "train_summary.json", summary.dump(2) + "\n");
  write_provenance(config, dir);
}

void cmd_score(const RunConfig& config) {
  const json checkpoint = load_matching_checkpoint(config);
  const DatasetManifest manifest = open_manifest(config);
  const auto records = manifest.select(config.score_split);
  if (records.empty()) throw DataError("manifest has no " + to_string(config.score_split) + " records");
  std::vector<Image> images = load_checked(config, manifest, records);
  for (Image& im : images) im = prepare(config, im);
  std::vector<ScoreRecord> out(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    out[i].path = records[i].path;
    out[i].label = records[i].label;
    out[i].split = records[i].split;
  }
  if (config.model.family == ModelFamily::kWaveletFlow) {
    const WaveletFlowModel model = waveletflow_from_checkpoint(checkpoint);
    const auto reports = score_images(model, images, config.threads);
    for (std::size_t i = 0; i < reports.size(); ++i) {
      out[i].score = reports[i].score;
      for (const auto& [level, d] : reports[i].per_level) out[i].level_scores[level] = d.bits_per_dim;
    }
  } else {
    const FlowModel model = glow_from_checkpoint(checkpoint);
    const Index s = config.model.image_size;
    parallel_chunks(images.size(), config.threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        const Tensor x = plane_tensor(images[i]).reshaped(Shape{1, 1, s, s});
        out[i].score = flow_log_likelihood(model, x).bits_per_dim;
      }
    });
  }
  const fs::path path = config.scores_path();
  fs::create_directories(path.parent_path());
  write_score_records(out, path);
  write_provenance(config, out_dir(config));
}

void cmd_eval(const RunConfig& config) {
  const fs::path path = config.scores_path();
  if (!fs::exists(path)) throw DataError("missing scores " + path.string());
  const auto records = read_score_records(path);
  if (records.empty()) throw DataError("no scores in " + path.string());
  const fs::path dir = out_dir(config);
  write_file(dir / "metrics.json", evaluate_records(records, config.bins).dump(2) + "\n");
  write_provenance(config, dir);
}

void cmd_baseline(const RunConfig& config) {
  const DatasetManifest manifest = open_manifest(config);
  const auto records = manifest.select(config.score_split);
  if (records.empty()) throw DataError("manifest has no " + to_string(config.score_split) + " records");
  const std::vector<Image> images = load_checked(config, manifest, records);
  std::vector<ScoreRecord> out(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const MagnitudeScore m = wavelet_magnitude_score(images[i]);
    out[i] = ScoreRecord{records[i].path, records[i].label, records[i].split, m.averaged, m.per_level};
  }
  const fs::path dir = out_dir(config);
  write_score_records(out, dir / "baseline_scores.jsonl");
  write_file(dir / "baseline_metrics.json", evaluate_records(out, config.bins).dump(2) + "\n");
  write_provenance(config, dir);
}

void cmd_sample(const RunConfig& config) {
  const json checkpoint = load_matching_checkpoint(config);
  const fs::path dir = out_dir(config) / "samples";
  fs::create_directories(dir);
  std::mt19937_64 rng(derive_seed(config.seed, 0x5a));
  const Index s = config.model.image_size;
  std::vector<Image> samples;
  if (config.model.family == ModelFamily::kWaveletFlow) {
    const WaveletFlowModel model = waveletflow_from_checkpoint(checkpoint);
    for (int i = 0; i < config.sample_count; ++i) samples.push_back(wf_sample(model, rng, config.temperature));
  } else {
    const FlowModel model = glow_from_checkpoint(checkpoint);
    const Tensor x = model.sample(rng, config.temperature, config.sample_count);
    for (int i = 0; i < config.sample_count; ++i) {
      samples.push_back(Eigen::Map<const Image>(x.values().data() + i * s * s, s, s));
    }
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%05zu.pgm", i);
    save_image(samples[i], dir / name);
  }
  write_provenance(config, out_dir(config));
}

// ---- entry point -----------------------------------------------------------------

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Wavelet-domain normalizing flows for out-of-distribution detection", "waveflow"};
  app.set_version_flag("--version", kVersion);
  std::string command;
  std::string config_path;
  std::optional<std::string> out_override;
  std::optional<std::uint64_t> seed_override;
  std::optional<int> threads_override;
  app.add_option("command", command, "synth, train, score, eval, baseline or sample")
      ->required()
      ->check(CLI::IsMember({"synth", "train", "score", "eval", "baseline", "sample"}));
  app.add_option("--config", config_path, "INI configuration file")->required();
  app.add_option("--out", out_override, "output directory");
  app.add_option("--seed", seed_override, "run seed; overrides every seed in the config");
  app.add_option("--threads", threads_override, "maximum worker threads")->check(CLI::PositiveNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "waveflow: usage error: " << e.what() << '\n';
    return 2;
  }

  const std::string who = "waveflow " + command + ": ";
  try {
    CliOverrides overrides;
    if (out_override) overrides.out_dir = fs::absolute(*out_override);
    overrides.seed = seed_override;
    overrides.threads = threads_override;
    const RunConfig config = load_run_config(config_path, overrides);
    if (command == "synth") cmd_synth(config);
    if (command == "train") cmd_train(config);
    if (command == "score") cmd_score(config);
    if (command == "eval") cmd_eval(config);
    if (command == "baseline") cmd_baseline(config);
    if (command == "sample") cmd_sample(config);
  } catch (const ConfigError& e) {
    err << who << "config error: " << e.what() << '\n';
    return 1;
  } catch (const CheckpointError& e) {
    err << who << "checkpoint error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    err << who << "data error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << who << "error: " << e.what() << '\n';
    return 1;
  }
  out << who << "done\n";
  return 0;
}

}  // namespace waveflow
