#pragma once

#include <filesystem>
#include <functional>

#include "nsl/checkpoint.hpp"
#include "nsl/dataset.hpp"
#include "nsl/matcher.hpp"
#include "nsl/metrics.hpp"
#include "nsl/refiner.hpp"

namespace nsl {

struct OptimConfig {
  double lr = 2e-4;
  double weight_decay = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 0.8;  // global gradient norm; <= 0 disables
  int steps = 3000;
  int batch_size = 4;
  std::string schedule = "onecycle";  // "onecycle" | "warmup_constant"
  double onecycle_pct_start = 0.05;
  double onecycle_div_factor = 25.0;
  double onecycle_final_div = 1000.0;
  int warmup_steps = 100;
  double backbone_lr_ratio = 0.1;  // stage-2 encoder multiplier
  bool augment = true;             // intensity jitter on the IR images

  void validate() const;
};

double schedule_lr(const OptimConfig& cfg, int step);  // step is 0-based

// Decoupled weight decay Adam. State is keyed by parameter name.
class AdamW {
 public:
  explicit AdamW(OptimConfig cfg) : cfg_(std::move(cfg)) {}

  // lr_mult, when set, scales the learning rate per parameter name.
  void step(nn::ParamStore<float>& params, double lr,
            const std::function<double(const std::string&)>& lr_mult = nullptr);

 private:
  OptimConfig cfg_;
  int t_ = 0;
  std::map<std::string, std::vector<float>> m_, v_;
};

// Scales gradients so the global norm does not exceed max_norm.
// Returns {pre-clip norm, post-clip norm}.
std::pair<double, double> clip_gradient_norm(nn::ParamStore<float>& params, double max_norm);

struct TrainLogRow {
  int step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;       // pre-clip
  double grad_norm_clipped = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<TrainLogRow> log;
  double first_loss = 0.0;
  double last_loss = 0.0;
};

void write_loss_csv(const std::filesystem::path& path, const std::vector<TrainLogRow>& log);

// Stage 1: sequence-loss training of the feature matcher on the dataset's
// train split. Deterministic given the seed. Aborts with the last finite
// checkpoint saved to out_dir on a NaN loss.
TrainResult train_stage1(const Dataset& dataset, const MatcherConfig& mcfg,
                         const OptimConfig& ocfg, std::uint64_t seed,
                         const std::filesystem::path& out_dir);

// Stage 2: the matcher checkpoint stays frozen and provides the depth prompt;
// only refiner parameters are optimized (encoder at backbone_lr_ratio).
TrainResult train_stage2(const Dataset& dataset, const Checkpoint& stage1,
                         const RefinerConfig& rcfg, const OptimConfig& ocfg, std::uint64_t seed,
                         const std::filesystem::path& out_dir);

// Serialization helpers shared by checkpoints and the CLI.
std::string matcher_config_to_json(const MatcherConfig& cfg);
MatcherConfig matcher_config_from_json(const std::string& text);
std::string refiner_config_to_json(const RefinerConfig& cfg);
RefinerConfig refiner_config_from_json(const std::string& text);

// Ground-truth disparity for the mode the matcher is trained against.
const DisparityMap& mode_gt_disparity(const Sample& sample, MatcherMode mode);

struct ShardEvaluation {
  MetricReport report;          // aggregated per-image mean
  std::vector<MetricReport> per_sample;
};

// Runs the matcher over records and scores depth + disparity against ground
// truth (stage-2 refinement applied when a refiner is supplied).
ShardEvaluation evaluate_matcher(const Matcher<float>& matcher, nn::ParamStore<float>& params,
                                 const Dataset& dataset,
                                 const std::vector<const SampleRecord*>& records,
                                 const Refiner<float>* refiner = nullptr,
                                 nn::ParamStore<float>* refiner_params = nullptr);

}  // namespace nsl
