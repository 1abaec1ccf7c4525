#pragma once

#include <CLI11.hpp>
#include <string>
#include <vector>

#include "nsl/config.hpp"

namespace nsl::cli {

// Shared --config/--set/--seed/--jobs handling for every subcommand.
struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed_override = 0;
  bool seed_set = false;
  int jobs = -1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "RunConfig JSON file (defaults apply if omitted)");
    cmd->add_option("--set", overrides, "Override a config key, e.g. --set matcher.mode=bino");
    cmd->add_option("--seed", seed_override, "Override config.seed")
        ->each([this](const std::string&) { seed_set = true; });
    cmd->add_option("--jobs", jobs, "Worker thread cap (overrides config.jobs)");
  }

  RunConfig load() const {
    RunConfig cfg = config_path.empty() ? default_run_config() : load_run_config(config_path);
    for (const auto& assignment : overrides) apply_override(cfg, assignment);
    if (seed_set) cfg.seed = seed_override;
    if (jobs >= 0) cfg.jobs = jobs;
    return cfg;
  }
};

void apply_jobs(const RunConfig& cfg);

void register_gen_pattern(CLI::App& app);
void register_gen_data(CLI::App& app);
void register_train_stage1(CLI::App& app);
void register_train_stage2(CLI::App& app);
void register_infer(CLI::App& app);
void register_baseline_tm(CLI::App& app);
void register_pseudo_gt(CLI::App& app);
void register_eval(CLI::App& app);
void register_report(CLI::App& app);

}  // namespace nsl::cli
