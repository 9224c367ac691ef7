#pragma once

#include <string>

#include "mqi/experiments.hpp"

namespace mqi {

/// Full application configuration: a sweep plus output bookkeeping.
struct AppConfig {
    SweepConfig sweep;
    std::string out_dir = ".";
};

/// Load a JSON config file. Missing or conflicting keys raise ConfigError with
/// the key name in the message. See README for the key reference.
AppConfig load_config(const std::string& path);

/// Parse just the chain section (flat key-value schema; each gain given either
/// as <name>_db or <name>_linear).
ChainParams chain_from_json_text(const std::string& text);
std::string chain_to_json_text(const ChainParams& chain);

/// One-line-per-key documentation of every config key with units.
std::string config_key_reference();

} // namespace mqi
