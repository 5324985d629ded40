#pragma once

#include <cstddef>
#include <string>

#include <json.hpp>

#include "dgi/model.hpp"
#include "dgi/trainer.hpp"

namespace dgi {

using Json = nlohmann::ordered_json;

/// Every TrainConfig field, keyed by its flag-style name.
Json config_to_json(const TrainConfig& cfg);
/// Overwrites the fields present in `j`. Unknown keys or wrong types raise
/// ConfigError.
void apply_config_json(TrainConfig& cfg, const Json& j);

struct Checkpoint {
  TrainConfig config;
  std::size_t vocab_size = 0;
  std::size_t step = 0;
  Model model;
};

/// Text container: config, vocabulary size, step counter, gamma and every
/// parameter tensor (name, shape, values) in creation order.
std::string checkpoint_to_string(Model& model, const TrainConfig& cfg, std::size_t vocab_size, std::size_t step);
void save_checkpoint(const std::string& path, Model& model, const TrainConfig& cfg, std::size_t vocab_size,
                     std::size_t step);
/// Throws ParseError on malformed content.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dgi
