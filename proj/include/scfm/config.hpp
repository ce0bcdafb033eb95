#pragma once

#include <filesystem>
#include <string>

#include "scfm/objectives.hpp"

namespace scfm {

// Strict JSON config: unknown keys and type mismatches raise ConfigError
// naming the key; missing keys fall back to TrainConfig defaults.
TrainConfig config_from_json(const std::string& json_text);
TrainConfig config_load(const std::filesystem::path& path);

// The full effective configuration; loading the echo reproduces the config.
std::string config_to_json(const TrainConfig& cfg);

} // namespace scfm
