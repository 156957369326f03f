#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "retrofilter/app/config.hpp"

namespace retrofilter::app {

enum class Subcommand { Simulate, Track, Decorrelate, Refilter, Compare, Reproduce };
enum class Figure { Fig2, Fig3, Fig4 };

std::string to_string(Subcommand s);
std::string to_string(Figure f);
std::optional<Figure> figure_from_string(const std::string& name);

struct CliConfig {
  Subcommand subcommand = Subcommand::Refilter;
  /// Required for every subcommand except reproduce, which defaults to the
  /// figure's preset.
  std::optional<std::filesystem::path> config_path;
  std::filesystem::path output_dir;
  std::optional<std::uint64_t> seed;
  Figure figure = Figure::Fig3;
};

/// Pass/fail statement about reproduced output.
struct FigureCheck {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct CommandResult {
  std::vector<std::filesystem::path> files;
  std::vector<FigureCheck> checks;
};

/// Pipeline stages in order. Each maps to its own exit code.
const std::vector<std::string>& stage_names();
int exit_code_for_stage(const std::string& stage);

/// Runs one subcommand. Failures are thrown as scenario::StageError.
CommandResult run_command(const CliConfig& cli);

/// Loads the config for `cli` and applies the seed override.
AppConfig resolve_config(const CliConfig& cli);

/// Largest gap between refiltered and source error norms after `start`,
/// relative to the source 1-sigma (RSS of the block's standard deviations).
struct ErrorGap {
  double position = 0.0;
  double velocity = 0.0;
};
ErrorGap max_error_gap(const scenario::MetricsSummary& metrics, double start);

/// Fraction of SSEM components of `axis` within `k` sigma of truth.
double ssem_coverage(const scenario::RunReport& report, int axis, double k);

}  // namespace retrofilter::app
