// Experiment pipeline CLI: backdoor attack enhancement, defenses and
// evaluation, driven by a config file. Every stage can run on its own and
// reproduces exactly what the full pipeline would have done for it.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "venom/config.hpp"
#include "venom/error.hpp"
#include "venom/experiment.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool out_set = false;
};

venom::ExperimentConfig load_config(const CommonArgs& args) {
  venom::ExperimentConfig cfg = venom::parse_config_file(args.config_path);
  if (args.seed_set) cfg.seed = args.seed;
  if (args.out_set) cfg.out_dir = args.out_dir;
  return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "Experiment config file")->required();
  cmd->add_option("--seed", args.seed, "Master seed override")
      ->each([&](const std::string&) { args.seed_set = true; });
  cmd->add_option("--out", args.out_dir, "Output directory override")
      ->each([&](const std::string&) { args.out_set = true; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"backdoor attack/defense laboratory"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string run_stage_name;
  std::string report_dir;

  CLI::App* cmd_run = app.add_subcommand("run", "Full pipeline (or one stage via --stage)");
  add_common(cmd_run, args);
  cmd_run->add_option("--stage", run_stage_name, "Run a single pipeline stage");

  for (const char* name : {"clean-train", "poison", "tcdp", "enhance", "defend", "evaluate"}) {
    CLI::App* cmd = app.add_subcommand(name, std::string("Pipeline stage: ") + name);
    add_common(cmd, args);
  }

  CLI::App* cmd_report = app.add_subcommand("report", "Rebuild summary.md from results.csv");
  cmd_report->add_option("--out", report_dir, "Directory holding results.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? 2 : 0;
  }

  try {
    if (cmd_report->parsed()) {
      venom::regenerate_summary(report_dir);
      std::cout << "summary.md regenerated in " << report_dir << "\n";
      return 0;
    }

    const venom::ExperimentConfig cfg = load_config(args);
    if (cmd_run->parsed() && run_stage_name.empty()) {
      const venom::ExperimentReport report = venom::run_experiment(cfg);
      std::cout << "pipeline complete; report in " << cfg.out_dir << "\n";
      for (const auto& block : report.variants) {
        std::cout << "  " << block.name << ": ba=" << block.before.ba
                  << " asr=" << block.before.asr << "\n";
        for (const auto& row : block.defenses)
          std::cout << "    " << row.name << ": ba=" << row.after.ba
                    << " asr=" << row.after.asr << " asur=" << row.surv.asur_value << "\n";
      }
      return 0;
    }

    std::string stage = run_stage_name;
    for (const char* name : {"clean-train", "poison", "tcdp", "enhance", "defend", "evaluate"})
      if (app.get_subcommand(name)->parsed()) stage = name;
    venom::run_stage(cfg, stage);
    std::cout << "stage '" << stage << "' complete; artifacts in " << cfg.out_dir << "\n";
    return 0;
  } catch (const venom::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
