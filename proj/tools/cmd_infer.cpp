#include <cstdio>
#include <filesystem>
#include <memory>

#include <nlohmann/json.hpp>

#include "cli_common.hpp"
#include "nsl/pfm.hpp"
#include "nsl/png_io.hpp"
#include "nsl/train.hpp"

namespace nsl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

void register_infer(CLI::App& app) {
  auto* cmd = app.add_subcommand("infer", "Run a trained model over dataset samples");
  auto opts = std::make_shared<CommonOpts>();
  auto data = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>("predictions");
  auto ckpt_path = std::make_shared<std::string>();
  auto stage2_path = std::make_shared<std::string>();
  auto sample_id = std::make_shared<std::string>();
  auto split = std::make_shared<std::string>("val");
  auto mode = std::make_shared<std::string>();
  auto stage = std::make_shared<int>(1);
  auto iters = std::make_shared<int>(0);
  opts->attach(cmd);
  cmd->add_option("--data", *data, "Dataset root (default: paths.data_root)");
  cmd->add_option("--out", *out, "Prediction output directory");
  cmd->add_option("--checkpoint", *ckpt_path, "Stage-1 checkpoint")->required();
  cmd->add_option("--stage2-checkpoint", *stage2_path, "Stage-2 checkpoint (required for --stage 2)");
  cmd->add_option("--sample", *sample_id, "Single sample id (default: whole --split)");
  cmd->add_option("--split", *split, "Dataset split: train|val|test_pattern");
  cmd->add_option("--mode", *mode, "Assert the checkpoint's input mode: mono|stereo|bino");
  cmd->add_option("--stage", *stage, "1: matcher only; 2: matcher + refiner")
      ->check(CLI::IsMember({1, 2}));
  cmd->add_option("--iters", *iters, "GRU iterations (default: checkpoint's iters_eval)");

  cmd->callback([=]() {
    const RunConfig cfg = opts->load();
    apply_jobs(cfg);
    const fs::path root = data->empty() ? resolve_cache_path(cfg.paths.data_root) : fs::path(*data);
    const Dataset dataset = Dataset::open(root);

    const Checkpoint ckpt = load_checkpoint(*ckpt_path);
    const json ckpt_cfg = json::parse(ckpt.config_json);
    if (ckpt_cfg.value("kind", "") != "stage1") {
      throw ConfigError("infer: --checkpoint must be a stage-1 matcher checkpoint");
    }
    const MatcherConfig mcfg = matcher_config_from_json(ckpt_cfg.at("matcher").dump());
    if (!mode->empty() && matcher_mode_from_string(*mode) != mcfg.mode) {
      throw ConfigError("infer: checkpoint was trained in mode '" +
                        std::string(to_string(mcfg.mode)) + "', not '" + *mode + "'");
    }
    const Matcher<float> matcher(mcfg);
    nn::ParamStore<float> params = ckpt.params.cast<float>();
    params.set_requires_grad(false);

    std::unique_ptr<Refiner<float>> refiner;
    nn::ParamStore<float> refiner_params;
    if (*stage == 2) {
      if (stage2_path->empty()) throw ConfigError("infer: --stage 2 needs --stage2-checkpoint");
      const Checkpoint s2 = load_checkpoint(*stage2_path);
      const json s2_cfg = json::parse(s2.config_json);
      if (s2_cfg.value("kind", "") != "stage2") {
        throw ConfigError("infer: --stage2-checkpoint must be a stage-2 refiner checkpoint");
      }
      refiner = std::make_unique<Refiner<float>>(
          refiner_config_from_json(s2_cfg.at("refiner").dump()));
      refiner_params = s2.params.cast<float>();
      refiner_params.set_requires_grad(false);
    }

    std::vector<const SampleRecord*> records;
    if (!sample_id->empty()) {
      for (const auto& rec : dataset.manifest().samples) {
        if (rec.id == *sample_id) records.push_back(&rec);
      }
      if (records.empty()) throw ConfigError("infer: unknown sample id " + *sample_id);
    } else {
      records = dataset.split(*split);
      if (records.empty()) throw ConfigError("infer: empty split " + *split);
    }

    for (const SampleRecord* rec : records) {
      const Sample sample = dataset.load(*rec);
      const MatcherRunResult run = run_matcher(matcher, params, sample, *iters);
      const fs::path dir = fs::path(*out) / rec->id;
      fs::create_directories(dir);
      write_pfm(dir / "disp_pred.pfm", run.disparity.values);
      write_pfm(dir / "depth_init.pfm", run.depth_init.values);
      write_png_mask(dir / "mask_pred.png", run.depth_init.mask);
      if (refiner) {
        const DepthMap refined =
            refine(sample.ir_left, run.depth_init, refiner_params, *refiner);
        write_pfm(dir / "depth_refined.pfm", refined.values);
      }
    }
    std::printf("wrote predictions for %zu samples under %s\n", records.size(), out->c_str());
  });
}

}  // namespace nsl::cli
