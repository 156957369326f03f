#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "retrofilter/app/commands.hpp"
#include "retrofilter/errors.hpp"

namespace app = retrofilter::app;

int main(int argc, char** argv) {
  CLI::App cli{"retrofilter: equivalent-measurement reconstruction and refiltering of track histories"};
  cli.require_subcommand(1);

  app::CliConfig cfg;
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::string figure;

  struct Entry {
    app::Subcommand sub;
    const char* help;
  };
  const Entry entries[] = {
      {app::Subcommand::Simulate, "Simulate truth and radar detections"},
      {app::Subcommand::Track, "Run the source EKF over the detections"},
      {app::Subcommand::Decorrelate, "Reconstruct equivalent measurements from the source track"},
      {app::Subcommand::Refilter, "Full pipeline: decorrelate, refilter and score"},
      {app::Subcommand::Compare, "Monte Carlo comparison of source and refiltered tracks"},
      {app::Subcommand::Reproduce, "Regenerate plot data and a gnuplot script for fig2, fig3 or fig4"},
  };
  for (const auto& e : entries) {
    CLI::App* sub = cli.add_subcommand(app::to_string(e.sub), e.help);
    auto* config_opt = sub->add_option("--config", config_path, "Configuration file (YAML)")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "Output directory")->required();
    sub->add_option("--seed", seed, "Seed override (config default: 0)");
    if (e.sub == app::Subcommand::Reproduce) {
      sub->add_option("figure", figure, "Figure to reproduce")
          ->required()
          ->check(CLI::IsMember({"fig2", "fig3", "fig4"}));
    } else {
      config_opt->required();
    }
    sub->final_callback([&cfg, sub_kind = e.sub] { cfg.subcommand = sub_kind; });
  }

  CLI11_PARSE(cli, argc, argv);

  if (!config_path.empty()) cfg.config_path = config_path;
  cfg.output_dir = out_dir;
  for (const auto* sub : cli.get_subcommands())
    if (sub->count("--seed")) cfg.seed = seed;
  if (cfg.subcommand == app::Subcommand::Reproduce) cfg.figure = *app::figure_from_string(figure);

  try {
    const app::CommandResult result = app::run_command(cfg);
    for (const auto& c : result.checks)
      std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.value << "\n";
    for (const auto& f : result.files) std::cout << "wrote " << f.string() << "\n";
    return 0;
  } catch (const retrofilter::scenario::StageError& e) {
    std::cerr << "retrofilter " << app::to_string(cfg.subcommand) << ": failed in stage '" << e.stage()
              << "' (" << retrofilter::to_string(e.kind()) << "): " << e.what() << "\n";
    return app::exit_code_for_stage(e.stage());
  } catch (const std::exception& e) {
    std::cerr << "retrofilter " << app::to_string(cfg.subcommand) << ": failed: " << e.what() << "\n";
    return 1;
  }
}
