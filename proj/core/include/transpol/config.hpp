#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "transpol/trainer.hpp"

namespace transpol {

/// Flat "key = value" configuration text; '#' starts a comment. Keys follow the
/// hyperparameter table names (episode_steps, rotation_angle_deg, ...). Unknown or
/// repeated keys and malformed values throw ConfigError.
TrainConfig parse_config(std::string_view text, const std::string& source = "<config>");
TrainConfig load_config(const std::filesystem::path& path);
/// Inverse of parse_config; every key is written.
std::string format_config(const TrainConfig& config);

/// Applies a single key/value pair (same syntax and errors as the file format).
void set_config_value(TrainConfig& config, std::string_view key, std::string_view value);
[[nodiscard]] const std::vector<std::string>& config_keys();
/// Closest valid key by edit distance.
[[nodiscard]] std::string nearest_config_key(std::string_view key);
std::size_t edit_distance(std::string_view a, std::string_view b);

/// Overrides config.seed from the SEED environment variable when set.
void apply_env_overrides(TrainConfig& config);

/// Reduced single-core setup: I=20, E=10, H=64, N=128, n=10.
TrainConfig desk_config();

struct RunManifest {
  std::string tool_version;
  std::string command;
  std::string config_text;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  std::vector<std::string> outputs;  ///< paths relative to out_dir
};

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);
RunManifest read_manifest(const std::filesystem::path& path);

}  // namespace transpol
