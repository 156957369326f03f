#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "retrofilter/scenario.hpp"

namespace retrofilter::app {

struct CompareOptions {
  /// Monte Carlo runs, seeded seed, seed + 1, ...
  std::size_t runs = 50;
};

struct AppConfig {
  scenario::ScenarioConfig scenario;
  scenario::MetricsWindow window;
  CompareOptions compare;
  /// Name of the preset the file was based on, if any.
  std::string preset;
};

/// Names accepted by `preset:` and preset_config().
std::vector<std::string> preset_names();

/// Built-in configuration. Throws a config error for unknown names.
AppConfig preset_config(const std::string& name);

/// Strict parse: unknown keys, wrong types and bad enum values are errors
/// that carry `source:line:column` and the dotted key path.
AppConfig parse_config_string(const std::string& text, const std::string& source = "<string>");

AppConfig parse_config(const std::filesystem::path& path);

/// Inverse of parse_config for every key in the schema.
std::string format_config(const AppConfig& cfg);

}  // namespace retrofilter::app
