#include <cstdio>
#include <filesystem>
#include <memory>

#include "cli_common.hpp"
#include "nsl/train.hpp"

namespace nsl::cli {

namespace fs = std::filesystem;

void register_train_stage1(CLI::App& app) {
  auto* cmd = app.add_subcommand("train-stage1", "Train the feature-matching disparity network");
  auto opts = std::make_shared<CommonOpts>();
  auto data = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto mode = std::make_shared<std::string>();
  opts->attach(cmd);
  cmd->add_option("--data", *data, "Dataset root (default: paths.data_root)");
  cmd->add_option("--out", *out, "Output directory (default: paths.checkpoint_dir)");
  cmd->add_option("--mode", *mode, "mono|stereo|bino (default: matcher.mode from config)");

  cmd->callback([opts, data, out, mode]() {
    RunConfig cfg = opts->load();
    apply_jobs(cfg);
    if (!mode->empty()) cfg.matcher.mode = matcher_mode_from_string(*mode);
    const fs::path root = data->empty() ? resolve_cache_path(cfg.paths.data_root) : fs::path(*data);
    const fs::path out_dir =
        out->empty() ? resolve_cache_path(cfg.paths.checkpoint_dir) : fs::path(*out);

    const Dataset dataset = Dataset::open(root);
    const TrainResult result =
        train_stage1(dataset, cfg.matcher, cfg.stage1_optim, cfg.seed, out_dir);
    std::printf("stage1 done: %d steps, loss %.4f -> %.4f, checkpoint %s\n",
                cfg.stage1_optim.steps, result.first_loss, result.last_loss,
                (out_dir / "stage1.ckpt").string().c_str());
  });
}

void register_train_stage2(CLI::App& app) {
  auto* cmd = app.add_subcommand("train-stage2",
                                 "Train the monocular depth refiner on top of a frozen stage-1 "
                                 "checkpoint");
  auto opts = std::make_shared<CommonOpts>();
  auto data = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto stage1 = std::make_shared<std::string>();
  opts->attach(cmd);
  cmd->add_option("--data", *data, "Dataset root (default: paths.data_root)");
  cmd->add_option("--out", *out, "Output directory (default: paths.checkpoint_dir)");
  cmd->add_option("--stage1", *stage1, "Stage-1 checkpoint path")->required();

  cmd->callback([opts, data, out, stage1]() {
    const RunConfig cfg = opts->load();
    apply_jobs(cfg);
    const fs::path root = data->empty() ? resolve_cache_path(cfg.paths.data_root) : fs::path(*data);
    const fs::path out_dir =
        out->empty() ? resolve_cache_path(cfg.paths.checkpoint_dir) : fs::path(*out);

    const Dataset dataset = Dataset::open(root);
    const Checkpoint stage1_ckpt = load_checkpoint(*stage1);
    const TrainResult result =
        train_stage2(dataset, stage1_ckpt, cfg.refiner, cfg.stage2_optim, cfg.seed, out_dir);
    std::printf("stage2 done: %d steps, loss %.4f -> %.4f, checkpoint %s\n",
                cfg.stage2_optim.steps, result.first_loss, result.last_loss,
                (out_dir / "stage2.ckpt").string().c_str());
  });
}

}  // namespace nsl::cli
