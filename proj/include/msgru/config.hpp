#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "msgru/synthgen.hpp"
#include "msgru/trainer.hpp"

namespace msgru::config {

/// One `key = value` setting and where it came from ("file:line" or "--set").
struct Setting {
  std::string key;
  std::string value;
  std::string origin;
};

using Entries = std::vector<std::pair<std::string, std::string>>;

/// Reads `key = value` lines; '#' starts a comment, blank lines are skipped.
std::vector<Setting> read_file(const std::filesystem::path& path);
/// Parses a `key=value` command-line override.
Setting parse_override(std::string_view text);

/// Applies one setting; throws ConfigError naming the origin for an unknown
/// key or an unparsable value.
void apply(synth::GenConfig& config, const Setting& s);
void apply(train::TrainConfig& config, const Setting& s);
bool is_gen_key(std::string_view key);
bool is_train_key(std::string_view key);

/// Every key with a value that parses back to the same config.
Entries entries(const synth::GenConfig& config);
Entries entries(const train::TrainConfig& config);

std::string format_double(double v);

}  // namespace msgru::config
