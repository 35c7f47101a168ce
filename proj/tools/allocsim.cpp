// Batch closed-loop allocation simulator.
//
//   allocsim run --config cfg.json [--out DIR] [--seed N] [--plots]
//   allocsim compare --config cfg.json [--out DIR] [--seed N]
//   allocsim validate-config --config cfg.json

#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "omni/harness.hpp"

namespace {

omni::ExperimentConfig load(const std::string& path, const std::string& out,
                            bool have_seed, std::uint64_t seed) {
  omni::ExperimentConfig cfg = omni::load_config(path);
  if (!out.empty()) cfg.output_dir = out;
  if (have_seed) {
    cfg.seed = seed;
    cfg.ocp.rng_seed = seed;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop control-allocation simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool plots = false;

  auto add_common = [&](CLI::App* cmd, bool with_plots) {
    cmd->add_option("--config", config_path, "JSON experiment configuration")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", out_dir, "output directory override");
    cmd->add_option("--seed", seed, "RNG seed override");
    if (with_plots) cmd->add_flag("--plots", plots, "emit SVG plots");
  };

  CLI::App* run = app.add_subcommand("run", "simulate one allocator");
  add_common(run, true);
  CLI::App* cmp = app.add_subcommand(
      "compare", "run the configured allocator against the MBNO baseline");
  add_common(cmp, false);
  CLI::App* val =
      app.add_subcommand("validate-config", "parse and validate a config");
  val->add_option("--config", config_path, "JSON experiment configuration")
      ->required()
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  const bool have_seed = run->count("--seed") > 0 || cmp->count("--seed") > 0;

  try {
    if (val->parsed()) {
      omni::ExperimentConfig cfg = omni::load_config(config_path);
      cfg.validate();
      omni::build_allocation(cfg.geometry);
      std::cout << "ok: " << cfg.step_count() << " steps, allocator "
                << omni::to_string(cfg.allocator) << "\n";
      return 0;
    }

    if (run->parsed()) {
      const omni::ExperimentConfig cfg =
          load(config_path, out_dir, have_seed, seed);
      const omni::RunResult result = omni::run_experiment(cfg);
      omni::emit_outputs(result.log, result.metrics, cfg.output_dir, plots);
      std::cout << omni::metrics_json(result.metrics);
      std::cout << "wrote " << cfg.output_dir << "/timeseries.csv and "
                << cfg.output_dir << "/metrics.json\n";
      return 0;
    }

    // compare: configured allocator vs the single-step MBNO baseline.
    omni::ExperimentConfig variant = load(config_path, out_dir, have_seed, seed);
    omni::ExperimentConfig base = variant;
    base.allocator = omni::AllocatorKind::kMbno;
    if (variant.allocator == omni::AllocatorKind::kMbno) {
      variant.allocator = omni::AllocatorKind::kRecedingHorizon;
    }
    const omni::ComparisonReport rep = omni::compare(base, variant);
    const std::string text = omni::comparison_json(rep);
    std::filesystem::create_directories(variant.output_dir);
    std::ofstream(std::filesystem::path(variant.output_dir) /
                  "comparison.json")
        << text;
    std::cout << text;
    return 0;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
}
