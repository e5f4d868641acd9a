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

#include "waveflow/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace waveflow {

using nlohmann::json;

std::string encode_doubles(const Eigen::ArrayXd& values) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(static_cast<std::size_t>(values.size()) * 16);
  for (Index i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(values(i));
    for (int byte = 0; byte < 8; ++byte) {
      const auto b = static_cast<unsigned>((bits >> (8 * byte)) & 0xFF);
      out.push_back(kDigits[b >> 4]);
      out.push_back(kDigits[b & 0xF]);
    }
  }
  return out;
}

Eigen::ArrayXd decode_doubles(const std::string& hex) {
  if (hex.size() % 16 != 0) {
    throw CheckpointError("checkpoint: parameter data length " + std::to_string(hex.size()) +
                          " is not a whole number of doubles");
  }
  auto nibble = [](char c) -> unsigned {
    if (c >= '0' && c <= '9') return static_cast<unsigned>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<unsigned>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<unsigned>(c - 'A' + 10);
    throw CheckpointError(std::string("checkpoint: invalid hex digit '") + c + "'");
  };
  Eigen::ArrayXd out(static_cast<Index>(hex.size() / 16));
  for (Index i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int byte = 0; byte < 8; ++byte) {
      const std::size_t at = static_cast<std::size_t>(i) * 16 + static_cast<std::size_t>(byte) * 2;
      const std::uint64_t b = (nibble(hex[at]) << 4) | nibble(hex[at + 1]);
      bits |= b << (8 * byte);
    }
    out(i) = std::bit_cast<double>(bits);
  }
  return out;
}

json glow_config_json(const GlowConfig& c) {
  return json{{"steps", c.steps},
              {"scales", c.scales},
              {"input_shape", c.input_shape},
              {"conditioning_channels", c.conditioning_channels},
              {"mask", to_string(c.mask)},
              {"hidden", c.hidden},
              {"seed", c.seed},
              {"prefix", c.prefix}};
}

GlowConfig glow_config_from_json(const json& j) {
  GlowConfig c;
  c.steps = j.at("steps").get<int>();
  c.scales = j.at("scales").get<int>();
  c.input_shape = j.at("input_shape").get<Shape>();
  c.conditioning_channels = j.at("conditioning_channels").get<Index>();
  c.mask = parse_mask_strategy(j.at("mask").get<std::string>());
  c.hidden = j.at("hidden").get<Index>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.prefix = j.at("prefix").get<std::string>();
  return c;
}

json waveletflow_config_json(const WaveletFlowConfig& c) {
  json levels = json::object();
  for (const auto& [level, steps] : c.level_steps) levels[std::to_string(level)] = steps;
  return json{{"image_size", c.image_size},
              {"depth", c.resolved_depth()},
              {"steps", c.steps},
              {"level_steps", levels},
              {"mask", to_string(c.mask)},
              {"hidden", c.hidden},
              {"seed", c.seed}};
}

WaveletFlowConfig waveletflow_config_from_json(const json& j) {
  WaveletFlowConfig c;
  c.image_size = j.at("image_size").get<Index>();
  c.depth = j.at("depth").get<int>();
  c.steps = j.at("steps").get<int>();
  for (const auto& [key, value] : j.at("level_steps").items()) {
    c.level_steps[std::stoi(key)] = value.get<int>();
  }
  c.mask = parse_mask_strategy(j.at("mask").get<std::string>());
  c.hidden = j.at("hidden").get<Index>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

namespace {

json parameters_json(const std::vector<const Parameter*>& params) {
  json out = json::array();
  for (const Parameter* p : params) {
    out.push_back(json{{"id", p->id()}, {"shape", p->shape()}, {"data", encode_doubles(p->values())}});
  }
  return out;
}

void assign_parameters(const json& stored, const ParameterList& params) {
  if (!stored.is_array() || stored.size() != params.size()) {
    throw CheckpointError("checkpoint: expected " + std::to_string(params.size()) +
                          " parameters, found " +
                          std::to_string(stored.is_array() ? stored.size() : 0));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    const json& s = stored[i];
    const auto id = s.at("id").get<std::string>();
    if (id != p.id()) {
      throw CheckpointError("checkpoint: parameter " + std::to_string(i) + " is '" + id +
                            "', expected '" + p.id() + "'");
    }
    const auto shape = s.at("shape").get<Shape>();
    if (shape != p.shape()) {
      throw CheckpointError("checkpoint: parameter '" + id + "' has shape " +
                            shape_string(shape) + ", expected " + shape_string(p.shape()));
    }
    Eigen::ArrayXd values = decode_doubles(s.at("data").get<std::string>());
    if (values.size() != p.size()) {
      throw CheckpointError("checkpoint: parameter '" + id + "' holds " +
                            std::to_string(values.size()) + " values, expected " +
                            std::to_string(p.size()));
    }
    p.mutable_values() = std::move(values);
  }
}

void check_header(const json& j, const std::string& family) {
  if (!j.is_object() || j.value("format", std::string()) != kCheckpointFormat) {
    throw CheckpointError("checkpoint: not a waveflow checkpoint");
  }
  const int version = j.value("version", -1);
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint: unsupported version " + std::to_string(version) +
                          " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const auto found = j.value("family", std::string());
  if (found != family) {
    throw CheckpointError("checkpoint: family is '" + found + "', expected '" + family + "'");
  }
}

template <class Fn>
auto translate_errors(Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint: malformed field: ") + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("checkpoint: cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw CheckpointError("checkpoint: write to " + path.string() + " failed");
}

}  // namespace

json checkpoint_json(const FlowModel& model) {
  return json{{"format", kCheckpointFormat},
              {"version", kCheckpointVersion},
              {"family", "glow"},
              {"architecture", glow_config_json(model.config())},
              {"initialized", model.initialized()},
              {"parameters", parameters_json(model.parameters())}};
}

json checkpoint_json(const WaveletFlowModel& model) {
  json init = json::object();
  init["0"] = std::visit([](const auto& d) { return d.initialized(); }, model.base());
  for (const auto& [level, flow] : model.level_flows()) {
    init[std::to_string(level)] = flow.initialized();
  }
  return json{{"format", kCheckpointFormat},
              {"version", kCheckpointVersion},
              {"family", "waveletflow"},
              {"architecture", waveletflow_config_json(model.config())},
              {"initialized", init},
              {"parameters", parameters_json(model.parameters())}};
}

FlowModel glow_from_checkpoint(const json& j) {
  check_header(j, "glow");
  return translate_errors([&] {
    FlowModel model = build_glow(glow_config_from_json(j.at("architecture")));
    assign_parameters(j.at("parameters"), model.parameters());
    model.set_initialized(j.at("initialized").get<bool>());
    return model;
  });
}

WaveletFlowModel waveletflow_from_checkpoint(const json& j) {
  check_header(j, "waveletflow");
  return translate_errors([&] {
    WaveletFlowModel model =
        build_waveletflow(waveletflow_config_from_json(j.at("architecture")));
    assign_parameters(j.at("parameters"), model.parameters());
    const json& init = j.at("initialized");
    std::visit([&](auto& d) { d.set_initialized(init.at("0").get<bool>()); }, model.base());
    for (auto& [level, flow] : model.level_flows()) {
      flow.set_initialized(init.at(std::to_string(level)).get<bool>());
    }
    return model;
  });
}

void save_checkpoint(const FlowModel& model, const std::filesystem::path& path) {
  write_text(path, checkpoint_json(model).dump(1));
}

void save_checkpoint(const WaveletFlowModel& model, const std::filesystem::path& path) {
  write_text(path, checkpoint_json(model).dump(1));
}

json read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  json j = json::parse(buffer.str(), nullptr, false);
  if (j.is_discarded()) {
    throw CheckpointError("checkpoint: " + path.string() + " is truncated or not valid JSON");
  }
  return j;
}

FlowModel load_glow(const std::filesystem::path& path) {
  return glow_from_checkpoint(read_checkpoint(path));
}

WaveletFlowModel load_waveletflow(const std::filesystem::path& path) {
  return waveletflow_from_checkpoint(read_checkpoint(path));
}

}  // namespace waveflow
