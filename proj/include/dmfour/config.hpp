#pragma once

#include "dmfour/training.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>

namespace dmfour {

/// Malformed configuration text or an unknown key.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Parses flat `key = value` lines grouped under [model], [training], [ablation] and [loss].
/// Keys left out keep their defaults; '#' starts a comment.
TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::filesystem::path& path);

/// Canonical text form; parse_config(config_text(c)) reproduces c exactly.
std::string config_text(const TrainConfig& cfg);

} // namespace dmfour
