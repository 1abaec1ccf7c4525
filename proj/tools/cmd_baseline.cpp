#include <cstdio>
#include <filesystem>
#include <memory>

#include "cli_common.hpp"
#include "nsl/block_match.hpp"
#include "nsl/pfm.hpp"
#include "nsl/png_io.hpp"
#include "nsl/scene.hpp"
#include "nsl/train.hpp"

namespace nsl::cli {

namespace fs = std::filesystem;

void register_baseline_tm(CLI::App& app) {
  auto* cmd = app.add_subcommand("baseline-tm",
                                 "Classical template-matching decoder over dataset samples");
  auto opts = std::make_shared<CommonOpts>();
  auto data = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>("tm_predictions");
  auto split = std::make_shared<std::string>("val");
  auto mode = std::make_shared<std::string>("mono");
  opts->attach(cmd);
  cmd->add_option("--data", *data, "Dataset root (default: paths.data_root)");
  cmd->add_option("--out", *out, "Prediction output directory");
  cmd->add_option("--split", *split, "Dataset split: train|val|test_pattern");
  cmd->add_option("--mode", *mode, "mono (IR vs pattern) or stereo (IR vs IR)")
      ->check(CLI::IsMember({"mono", "stereo"}));

  cmd->callback([=]() {
    const RunConfig cfg = opts->load();
    apply_jobs(cfg);
    const fs::path root = data->empty() ? resolve_cache_path(cfg.paths.data_root) : fs::path(*data);
    const Dataset dataset = Dataset::open(root);
    const auto records = dataset.split(*split);
    if (records.empty()) throw ConfigError("baseline-tm: empty split " + *split);

    const BlockMatchConfig bm = cfg.block_match_config();
    for (const SampleRecord* rec : records) {
      const Sample sample = dataset.load(*rec);
      const bool mono = *mode == "mono";
      const Raster<double>& reference =
          mono ? sample.pattern_ref.intensities : sample.ir_right;
      const DisparityMap disp = block_match(sample.ir_left, reference, bm);
      const double baseline = mono ? sample.rig.baseline_lp : sample.rig.baseline_lr;
      DepthMap depth = disparity_to_depth(disp, sample.rig.cam_left.fx, baseline);
      depth.mask = depth.mask & remove_depth_outliers(depth, cfg.block_match.outlier_grad_thresh);

      const fs::path dir = fs::path(*out) / rec->id;
      fs::create_directories(dir);
      write_pfm(dir / "disp_tm.pfm", disp.values);
      write_pfm(dir / "depth_tm.pfm", depth.values);
      write_png_mask(dir / "mask_tm.png", depth.mask);
    }
    std::printf("wrote TM predictions for %zu samples under %s\n", records.size(), out->c_str());
  });
}

void register_pseudo_gt(CLI::App& app) {
  auto* cmd = app.add_subcommand("pseudo-gt",
                                 "Multi-pattern temporal ZNCC decoding of a JSON scene");
  auto opts = std::make_shared<CommonOpts>();
  auto scene_path = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>("pseudo_gt");
  auto k = std::make_shared<int>(0);
  opts->attach(cmd);
  cmd->add_option("--scene", *scene_path, "Scene JSON file")->required();
  cmd->add_option("--out", *out, "Output directory");
  cmd->add_option("--k", *k, "Number of alacarte patterns (default: block_match.temporal_k)");

  cmd->callback([=]() {
    const RunConfig cfg = opts->load();
    apply_jobs(cfg);
    const Scene scene = scene_from_json_file(*scene_path);
    const int num_patterns = *k > 0 ? *k : cfg.block_match.temporal_k;

    RigCalibration rig;
    Intrinsics cam;
    cam.fx = cam.fy = 0.5 * (cfg.dataset.focal_min + cfg.dataset.focal_max);
    cam.cx = cfg.dataset.width / 2.0;
    cam.cy = cfg.dataset.height / 2.0;
    cam.width = cfg.dataset.width;
    cam.height = cfg.dataset.height;
    rig.cam_left = rig.cam_right = rig.projector = cam;
    rig.baseline_lr = 0.5 * (cfg.dataset.baseline_lr_min + cfg.dataset.baseline_lr_max);
    rig.baseline_lp = 0.5 * (cfg.dataset.baseline_lp_min + cfg.dataset.baseline_lp_max);

    TemporalStack stack;
    const Rng root(cfg.seed);
    for (int i = 0; i < num_patterns; ++i) {
      PatternSpec spec;
      spec.kind = PatternKind::kAlacarte;
      spec.width = cam.width;
      spec.height = cam.height;
      spec.seed = root.derive(0xa1acau + static_cast<std::uint64_t>(i)).next_u64();
      const PatternImage pattern = generate_pattern(spec);

      RenderConfig rcfg;
      rcfg.rig = rig;
      rcfg.pattern = pattern;
      rcfg.noise_sigma = cfg.dataset.noise_sigma;
      rcfg.gamma = cfg.dataset.gamma;
      rcfg.seed = root.derive(0x5eedu + static_cast<std::uint64_t>(i)).next_u64();
      stack.captures.push_back(render_ir(scene, rcfg, CameraView::kLeft));
      stack.references.push_back(pattern.intensities);
    }

    DisparityMap disp = temporal_zncc_decode(stack, cfg.block_match.max_disp);
    DepthMap depth = disparity_to_depth(disp, rig.cam_left.fx, rig.baseline_lp);
    depth.mask = depth.mask & remove_depth_outliers(depth, cfg.block_match.outlier_grad_thresh);

    fs::create_directories(*out);
    write_pfm(fs::path(*out) / "disp_pseudo.pfm", disp.values);
    write_pfm(fs::path(*out) / "depth_pseudo.pfm", depth.values);
    write_png_mask(fs::path(*out) / "mask_pseudo.png", depth.mask);
    std::printf("wrote pseudo ground truth (K=%d) under %s\n", num_patterns, out->c_str());
  });
}

}  // namespace nsl::cli
