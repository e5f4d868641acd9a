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
#include "waveflow/cli.hpp"
#include "waveflow/eval.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace waveflow;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "waveflow");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

struct Workspace {
  fs::path dir;
  explicit Workspace(const std::string& name) : dir(fs::temp_directory_path() / name) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }

  std::string config(const std::string& name, const std::string& text) const {
    std::ofstream(dir / name) << text;
    return (dir / name).string();
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kTiny = R"([run]
out = out
seed = 3

[synth]
image_size = 16
train_count = 50
test_in_count = 12
test_ood_count = 12

[model]
image_size = 16
steps = 2
hidden = 8

[train]
max_epochs = 2
batch_size = 16
)";

std::string with_model_line(const std::string& line) {
  std::string text = kTiny;
  const std::string section = "[model]\n";
  text.insert(text.find(section) + section.size(), line + "\n");
  return text;
}

}  // namespace

TEST_CASE("config parsing, defaults and seeds") {
  const RunConfig c = parse_run_config(kTiny, "/base");
  CHECK(c.out_dir == "out");
  CHECK(c.resolve(c.out_dir) == fs::path("/base/out"));
  CHECK(c.manifest_path() == fs::path("/base/out/dataset/manifest.csv"));
  CHECK(c.synth.seed == 3);
  CHECK(c.model.seed == 3);
  CHECK(c.train.seed == 3);
  CHECK(c.model.family == ModelFamily::kWaveletFlow);
  CHECK(c.train.learning_rate == 1e-4);

  const RunConfig o = parse_run_config(std::string(kTiny) + "[score]\nsplit = train\n", "/base",
                                       CliOverrides{fs::path("/elsewhere"), 11, 2});
  CHECK(o.out_dir == fs::path("/elsewhere"));
  CHECK(o.synth.seed == 11);
  CHECK(o.model.seed == 11);
  CHECK(o.threads == 2);
  CHECK(o.score_split == DatasetSplit::kTrain);

  const RunConfig m = parse_run_config("[model]\nfamily = glow\nsteps = 4\nscales = 2\nmask = radial\n"
                                       "level_steps = 3:8 4:6\ndepth = 3\n[train]\nseed = 9\n");
  CHECK(m.model.family == ModelFamily::kGlow);
  CHECK(m.model.glow().scales == 2);
  CHECK(m.model.mask == MaskStrategy::kRadial);
  CHECK(m.model.level_steps == std::map<int, int>{{3, 8}, {4, 6}});
  CHECK(m.train.seed == 9);
  CHECK(m.model.seed == 0);
}

TEST_CASE("config validation errors") {
  CHECK_THROWS_WITH_AS(parse_run_config("[model]\nwidth = 3\n"), doctest::Contains("unknown key [model] width"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_run_config("[bogus]\nx = 1\n"), doctest::Contains("unknown key [bogus] x"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_run_config("seed = 1\n"), doctest::Contains("outside any section"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_run_config("[train]\nbatch_size = many\n"), doctest::Contains("invalid value"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_run_config("[train]\npatience = 0\n"), doctest::Contains("patience"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_run_config("[model]\nfamily = pixelcnn\n"), doctest::Contains("family"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_run_config("[model]\nimage_size = 24\n"), doctest::Contains("power of two"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_run_config("[train]\ndequantize = maybe\n"), doctest::Contains("boolean"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("[train\n"), ConfigError);
}

TEST_CASE("resolved config round trips") {
  const RunConfig c = parse_run_config(kTiny, "/base");
  const std::string ini = resolved_config_ini(c);
  CHECK(ini.find("out = /base/out\n") != std::string::npos);
  CHECK(ini.find("family = waveletflow\n") != std::string::npos);
  const RunConfig again = parse_run_config(ini, "/base");
  CHECK(resolved_config_ini(again) == ini);
}

TEST_CASE("tiny pipeline end to end is reproducible") {
  Workspace ws("waveflow_cli_pipeline");
  const std::string config = ws.config("tiny.ini", kTiny);
  std::string first_metrics;
  for (const std::string run : {"a", "b"}) {
    const std::string out = (ws.dir / run).string();
    for (const std::string cmd : {"synth", "train", "score", "eval", "baseline", "sample"}) {
      const Run r = cli({cmd, "--config", config, "--out", out});
      CAPTURE(cmd);
      CAPTURE(r.err);
      REQUIRE(r.code == 0);
    }
    const nlohmann::json metrics = nlohmann::json::parse(slurp(ws.dir / run / "metrics.json"));
    const double a = metrics["score"]["auc"];
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
    CHECK(fs::exists(ws.dir / run / "resolved_config.ini"));
    CHECK(fs::exists(ws.dir / run / "versions.json"));
    CHECK(fs::exists(ws.dir / run / "dataset" / "synth_config.json"));
    CHECK(fs::exists(ws.dir / run / "samples" / "sample_00000.pgm"));
    CHECK(fs::exists(ws.dir / run / "baseline_metrics.json"));
    if (first_metrics.empty()) {
      first_metrics = slurp(ws.dir / run / "metrics.json");
    } else {
      CHECK(slurp(ws.dir / run / "metrics.json") == first_metrics);
      CHECK(slurp(ws.dir / "a" / "checkpoint.json") == slurp(ws.dir / "b" / "checkpoint.json"));
    }
  }
}

TEST_CASE("command diagnostics") {
  Workspace ws("waveflow_cli_errors");
  const std::string out = (ws.dir / "out").string();
  const std::string config = ws.config("tiny.ini", kTiny);

  Run r = cli({"train", "--config", config, "--out", out});
  CHECK(r.code != 0);
  CHECK(r.err.find("missing manifest") != std::string::npos);

  r = cli({"score", "--config", config, "--out", out});
  CHECK(r.code != 0);
  CHECK(r.err.find("missing checkpoint") != std::string::npos);

  fs::create_directories(ws.dir / "out");
  std::ofstream(ws.dir / "out" / "scores.jsonl").close();
  r = cli({"eval", "--config", config, "--out", out});
  CHECK(r.code != 0);
  CHECK(r.err.find("no scores") != std::string::npos);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);

  fs::create_directories(ws.dir / "bad");
  std::ofstream(ws.dir / "bad" / "manifest.csv") << "path,label,split\nimages/x.pgm,ood,train\n";
  const std::string bad = ws.config("bad.ini", std::string(kTiny) + "[data]\nmanifest = bad/manifest.csv\n");
  r = cli({"train", "--config", bad, "--out", out});
  CHECK(r.code != 0);
  CHECK(r.err.find("train split") != std::string::npos);

  r = cli({"train", "--config", ws.config("unknown.ini", "[train]\nepochs = 3\n")});
  CHECK(r.code != 0);
  CHECK(r.err.find("config error: unknown key [train] epochs") != std::string::npos);

  r = cli({"fly", "--config", config});
  CHECK(r.code == 2);
  r = cli({"train"});
  CHECK(r.code == 2);
  r = cli({"train", "--config", (ws.dir / "nope.ini").string()});
  CHECK(r.code != 0);
  CHECK(r.err.find("cannot read config") != std::string::npos);
}

TEST_CASE("checkpoint and architecture mismatch") {
  Workspace ws("waveflow_cli_mismatch");
  const std::string out = (ws.dir / "out").string();
  const std::string config = ws.config("tiny.ini", kTiny);
  REQUIRE(cli({"synth", "--config", config, "--out", out}).code == 0);
  REQUIRE(cli({"train", "--config", config, "--out", out}).code == 0);

  const std::string glow = ws.config("glow.ini", with_model_line("family = glow"));
  Run r = cli({"score", "--config", glow, "--out", out});
  CHECK(r.code != 0);
  CHECK(r.err.find("checkpoint family 'waveletflow'") != std::string::npos);

  const std::string wider = ws.config("wider.ini", with_model_line("mask = radial"));
  r = cli({"score", "--config", wider, "--out", out});
  CHECK(r.code != 0);
  CHECK(r.err.find("architecture differs") != std::string::npos);
}
