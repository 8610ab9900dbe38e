// SPDX-License-Identifier: Apache-2.0
//
// JSON forms of mixture parameters and model checkpoints. Doubles are written
// in shortest round-trip form, so reading back reproduces every bit.
#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "dmn/error.hpp"
#include "dmn/mixture.hpp"
#include "dmn/network.hpp"

namespace dmn {

using nlohmann::json;

inline json to_json(const MixtureParams& p) { return json{{"weights", p.weights}, {"alphas", p.alphas}}; }

inline MixtureParams mixture_from_json(const json& j) {
  try {
    return make_mixture(j.at("weights").get<std::vector<double>>(),
                        j.at("alphas").get<std::vector<std::vector<double>>>());
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("mixture JSON: ") + e.what());
  }
}

struct Checkpoint {
  MlpModel model;
  std::uint64_t seed = 0;
  json config = json::object();
};

inline json to_json(const Checkpoint& c) {
  json layers = json::array();
  for (const auto& l : c.model.layers()) layers.push_back({{"weight", l.weight}, {"bias", l.bias}});
  return json{{"format", "dmn-checkpoint-v1"},
              {"layer_sizes", c.model.layer_sizes()},
              {"K", c.model.components()},
              {"d", c.model.classes()},
              {"layers", layers},
              {"seed", c.seed},
              {"config", c.config}};
}

inline Checkpoint checkpoint_from_json(const json& j) {
  try {
    const auto sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    const auto K = j.at("K").get<std::size_t>();
    const auto d = j.at("d").get<std::size_t>();
    const auto& layers_json = j.at("layers");
    if (sizes.size() != layers_json.size() + 1) throw ParseError(0, "checkpoint: layer_sizes and layers disagree");
    std::vector<Layer> layers;
    for (std::size_t l = 0; l < layers_json.size(); ++l) {
      Layer layer(sizes[l], sizes[l + 1]);
      layer.weight = layers_json[l].at("weight").get<std::vector<double>>();
      layer.bias = layers_json[l].at("bias").get<std::vector<double>>();
      layers.push_back(std::move(layer));
    }
    Checkpoint c;
    c.model = MlpModel::from_layers(std::move(layers), K, d);
    c.seed = j.value("seed", std::uint64_t{0});
    c.config = j.value("config", json::object());
    return c;
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("checkpoint JSON: ") + e.what());
  }
}

inline json read_json(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ParseError(0, "'" + path + "': " + e.what());
  }
}

inline void write_json(const json& j, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << j.dump(2) << '\n';
  if (!os) throw IoError("write to '" + path + "' failed");
}

inline void save_checkpoint(const Checkpoint& c, const std::string& path) { write_json(to_json(c), path); }
inline Checkpoint load_checkpoint(const std::string& path) { return checkpoint_from_json(read_json(path)); }

}  // namespace dmn
