#pragma once

#include <filesystem>
#include <string>

#include "nsl/block_match.hpp"
#include "nsl/dataset.hpp"
#include "nsl/matcher.hpp"
#include "nsl/refiner.hpp"
#include "nsl/train.hpp"

namespace nsl {

// One JSON file drives every subcommand; see docs/config.md for the schema.
// Unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 1;
  int jobs = 0;  // worker cap; 0 = library default

  struct Paths {
    std::string data_root = "data";
    std::string checkpoint_dir = "checkpoints";
    std::string output_dir = "out";
  } paths;

  DatasetConfig dataset;
  MatcherConfig matcher;
  RefinerConfig refiner;
  OptimConfig stage1_optim;
  OptimConfig stage2_optim;

  struct BlockMatchSettings {
    int window = 9;
    int max_disp = 48;
    std::string metric = "zncc";
    double lrc_tol = 1.0;
    double min_texture = 1e-6;
    double outlier_grad_thresh = 0.08;  // meters/px, depth outlier removal
    int temporal_k = 8;                 // pseudo-gt pattern count
  } block_match;

  BlockMatchConfig block_match_config() const;
};

RunConfig default_run_config();

// Parse + schema-validate a config file; missing keys fall back to defaults.
RunConfig load_run_config(const std::filesystem::path& path);

// Apply a dotted-path override such as "matcher.mode=bino" or
// "stage1_optim.steps=500". Unknown paths or type mismatches throw.
void apply_override(RunConfig& cfg, const std::string& assignment);

std::string run_config_to_json(const RunConfig& cfg);

// Relative paths resolve under $NSL_LAB_CACHE when that variable is set.
std::filesystem::path resolve_cache_path(const std::string& path);

}  // namespace nsl
