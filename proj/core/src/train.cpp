#include "nsl/train.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "nsl/error.hpp"
#include "nsl/rng.hpp"

namespace nsl {

using nlohmann::json;

void OptimConfig::validate() const {
  if (lr <= 0.0) throw ConfigError("optim: lr must be positive");
  if (weight_decay < 0.0) throw ConfigError("optim: weight_decay must be >= 0");
  if (steps < 1 || batch_size < 1) throw ConfigError("optim: steps and batch_size must be >= 1");
  if (schedule != "onecycle" && schedule != "warmup_constant") {
    throw ConfigError("optim: unknown schedule '" + schedule + "'");
  }
  if (warmup_steps < 0) throw ConfigError("optim: warmup_steps must be >= 0");
}

double schedule_lr(const OptimConfig& cfg, int step) {
  if (cfg.schedule == "warmup_constant") {
    if (cfg.warmup_steps <= 0) return cfg.lr;
    return cfg.lr * std::min(1.0, static_cast<double>(step) / cfg.warmup_steps);
  }
  // One-cycle: linear ramp from lr/div to lr over pct_start, then cosine
  // anneal down to lr/final_div.
  const double ramp_end = std::max(1.0, cfg.onecycle_pct_start * cfg.steps);
  if (step < ramp_end) {
    const double f = step / ramp_end;
    const double lo = cfg.lr / cfg.onecycle_div_factor;
    return lo + f * (cfg.lr - lo);
  }
  const double f = std::min(1.0, (step - ramp_end) / std::max(1.0, cfg.steps - ramp_end));
  const double lo = cfg.lr / cfg.onecycle_final_div;
  return lo + 0.5 * (cfg.lr - lo) * (1.0 + std::cos(3.14159265358979323846 * f));
}

void AdamW::step(nn::ParamStore<float>& params, double lr,
                 const std::function<double(const std::string&)>& lr_mult) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (auto& [name, tensor] : params.all()) {
    if (tensor.grad().size() != tensor.numel()) continue;  // never touched by backward
    auto& m = m_[name];
    auto& v = v_[name];
    if (m.size() != tensor.numel()) m.assign(tensor.numel(), 0.0f);
    if (v.size() != tensor.numel()) v.assign(tensor.numel(), 0.0f);
    const double lr_p = lr * (lr_mult ? lr_mult(name) : 1.0);
    float* w = tensor.value().data();
    const float* g = tensor.grad().data();
    for (std::size_t i = 0; i < tensor.numel(); ++i) {
      m[i] = static_cast<float>(cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i]);
      v[i] = static_cast<float>(cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i]);
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] = static_cast<float>(w[i] - lr_p * (mhat / (std::sqrt(vhat) + cfg_.adam_eps) +
                                               cfg_.weight_decay * w[i]));
    }
  }
}

std::pair<double, double> clip_gradient_norm(nn::ParamStore<float>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, tensor] : params.all()) {
    for (float g : tensor.grad()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm <= 0.0 || norm <= max_norm || norm == 0.0) return {norm, norm};
  const float scale = static_cast<float>(max_norm / norm);
  for (auto& [name, tensor] : params.all()) {
    for (float& g : tensor.grad()) g *= scale;
  }
  return {norm, max_norm};
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<TrainLogRow>& log) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << "step,lr,loss,grad_norm,grad_norm_clipped\n";
  char buf[160];
  for (const auto& row : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.8e,%.8e,%.8e,%.8e\n", row.step, row.lr, row.loss,
                  row.grad_norm, row.grad_norm_clipped);
    out << buf;
  }
}

std::string matcher_config_to_json(const MatcherConfig& cfg) {
  json j;
  j["mode"] = to_string(cfg.mode);
  j["feature_dim"] = cfg.feature_dim;
  j["downsample"] = cfg.downsample;
  j["pyramid_levels"] = cfg.pyramid_levels;
  j["iters_train"] = cfg.iters_train;
  j["iters_eval"] = cfg.iters_eval;
  j["lookup_radius"] = cfg.lookup_radius;
  j["loss_gamma"] = cfg.loss_gamma;
  j["encoder_base"] = cfg.encoder_base;
  j["hidden_dim"] = cfg.hidden_dim;
  j["convex_upsampling"] = cfg.convex_upsampling;
  return j.dump();
}

MatcherConfig matcher_config_from_json(const std::string& text) {
  const json j = json::parse(text);
  MatcherConfig cfg;
  cfg.mode = matcher_mode_from_string(j.at("mode").get<std::string>());
  cfg.feature_dim = j.at("feature_dim").get<int>();
  cfg.downsample = j.at("downsample").get<int>();
  cfg.pyramid_levels = j.at("pyramid_levels").get<int>();
  cfg.iters_train = j.at("iters_train").get<int>();
  cfg.iters_eval = j.at("iters_eval").get<int>();
  cfg.lookup_radius = j.at("lookup_radius").get<int>();
  cfg.loss_gamma = j.at("loss_gamma").get<double>();
  cfg.encoder_base = j.at("encoder_base").get<int>();
  cfg.hidden_dim = j.at("hidden_dim").get<int>();
  cfg.convex_upsampling = j.at("convex_upsampling").get<bool>();
  cfg.validate();
  return cfg;
}

std::string refiner_config_to_json(const RefinerConfig& cfg) {
  json j;
  j["backbone_width"] = cfg.backbone_width;
  j["alpha"] = cfg.alpha;
  j["prompt_convs"] = cfg.prompt_convs;
  j["prompt_scale"] = cfg.prompt_scale;
  return j.dump();
}

RefinerConfig refiner_config_from_json(const std::string& text) {
  const json j = json::parse(text);
  RefinerConfig cfg;
  cfg.backbone_width = j.at("backbone_width").get<int>();
  cfg.alpha = j.at("alpha").get<double>();
  cfg.prompt_convs = j.at("prompt_convs").get<int>();
  cfg.prompt_scale = j.at("prompt_scale").get<double>();
  cfg.validate();
  return cfg;
}

const DisparityMap& mode_gt_disparity(const Sample& sample, MatcherMode mode) {
  return mode == MatcherMode::kMono ? sample.disp_gt_lp : sample.disp_gt_lr;
}

namespace {

// Same gain/offset on both IR views; the pattern reference is never jittered.
void jitter_intensity(Sample& sample, Rng& rng) {
  const double gain = rng.uniform(0.9, 1.1);
  const double offset = rng.uniform(-0.03, 0.03);
  for (Raster<double>* img : {&sample.ir_left, &sample.ir_right}) {
    for (double& v : img->values()) v = std::clamp(gain * v + offset, 0.0, 1.0);
  }
}

MatcherInput<float> make_input(const Sample& sample, MatcherMode mode) {
  MatcherInput<float> input;
  input.ir_left = raster_to_tensor(sample.ir_left);
  if (mode != MatcherMode::kMono) input.ir_right = raster_to_tensor(sample.ir_right);
  if (mode != MatcherMode::kStereo) input.pattern = raster_to_tensor(sample.pattern_ref.intensities);
  input.baseline_ratio = sample.rig.baseline_lp / sample.rig.baseline_lr;
  return input;
}

nn::ParamStore<float> copy_params(const nn::ParamStore<float>& src) {
  return src.template cast<float>();
}

}  // namespace

TrainResult train_stage1(const Dataset& dataset, const MatcherConfig& mcfg,
                         const OptimConfig& ocfg, std::uint64_t seed,
                         const std::filesystem::path& out_dir) {
  ocfg.validate();
  const auto records = dataset.split("train");
  if (records.empty()) throw ConfigError("train_stage1: dataset has no train split");
  std::filesystem::create_directories(out_dir);

  const Matcher<float> matcher(mcfg);
  nn::ParamStore<float> params;
  matcher.init_params(params, seed);
  AdamW opt(ocfg);
  const Rng root(seed);

  TrainResult result;
  nn::ParamStore<float> last_good = copy_params(params);
  std::uint64_t last_good_step = 0;

  auto save = [&](const nn::ParamStore<float>& ps, std::uint64_t step,
                  const std::filesystem::path& path) {
    Checkpoint ckpt;
    ckpt.step = step;
    ckpt.seed = seed;
    json cj;
    cj["kind"] = "stage1";
    cj["matcher"] = json::parse(matcher_config_to_json(mcfg));
    ckpt.config_json = cj.dump();
    ckpt.params = copy_params(ps);
    save_checkpoint(path, ckpt);
    return ckpt;
  };

  for (int step = 0; step < ocfg.steps; ++step) {
    Rng step_rng = root.derive(0x57e90000ull + static_cast<std::uint64_t>(step));
    params.zero_grads();

    double loss_value = 0.0;
    for (int b = 0; b < ocfg.batch_size; ++b) {
      const SampleRecord& rec = *records[step_rng.next_below(records.size())];
      Sample sample = dataset.load(rec);
      if (ocfg.augment) jitter_intensity(sample, step_rng);

      MatcherForward<float> fwd =
          matcher.forward(params, make_input(sample, mcfg.mode), mcfg.iters_train);
      nn::Tensor<float> loss =
          sequence_loss(fwd.disp_sequence, mode_gt_disparity(sample, mcfg.mode), mcfg.loss_gamma);
      loss = nn::scale(loss, 1.0f / static_cast<float>(ocfg.batch_size));
      loss_value += loss.item();
      nn::backward(loss);
    }

    if (!std::isfinite(loss_value)) {
      save(last_good, last_good_step, out_dir / "stage1_last_finite.ckpt");
      throw RuntimeFailure("train_stage1: non-finite loss at step " + std::to_string(step) +
                           "; last finite checkpoint saved");
    }

    const double lr = schedule_lr(ocfg, step);
    const auto [norm, clipped] = clip_gradient_norm(params, ocfg.clip_norm);
    opt.step(params, lr);

    result.log.push_back({step, lr, loss_value, norm, clipped});
    if (step == 0) result.first_loss = loss_value;
    result.last_loss = loss_value;
    last_good = copy_params(params);
    last_good_step = static_cast<std::uint64_t>(step) + 1;
  }

  result.checkpoint = save(params, static_cast<std::uint64_t>(ocfg.steps),
                           out_dir / "stage1.ckpt");
  write_loss_csv(out_dir / "stage1_loss.csv", result.log);
  return result;
}

TrainResult train_stage2(const Dataset& dataset, const Checkpoint& stage1,
                         const RefinerConfig& rcfg, const OptimConfig& ocfg, std::uint64_t seed,
                         const std::filesystem::path& out_dir) {
  ocfg.validate();
  const auto records = dataset.split("train");
  if (records.empty()) throw ConfigError("train_stage2: dataset has no train split");
  std::filesystem::create_directories(out_dir);

  const json stage1_cfg = json::parse(stage1.config_json);
  if (stage1_cfg.value("kind", "") != "stage1") {
    throw ConfigError("train_stage2: checkpoint is not a stage-1 matcher");
  }
  const MatcherConfig mcfg = matcher_config_from_json(stage1_cfg.at("matcher").dump());
  const Matcher<float> matcher(mcfg);
  nn::ParamStore<float> matcher_params = stage1.params.cast<float>();
  matcher_params.set_requires_grad(false);  // frozen

  const Refiner<float> refiner(rcfg);
  nn::ParamStore<float> params;
  refiner.init_params(params, seed);
  AdamW opt(ocfg);
  const Rng root(seed);

  auto lr_mult = [&](const std::string& name) {
    return name.rfind("enc.", 0) == 0 ? ocfg.backbone_lr_ratio : 1.0;
  };

  TrainResult result;
  nn::ParamStore<float> last_good = copy_params(params);
  std::uint64_t last_good_step = 0;

  auto save = [&](const nn::ParamStore<float>& ps, std::uint64_t step,
                  const std::filesystem::path& path) {
    Checkpoint ckpt;
    ckpt.step = step;
    ckpt.seed = seed;
    json cj;
    cj["kind"] = "stage2";
    cj["refiner"] = json::parse(refiner_config_to_json(rcfg));
    cj["matcher"] = stage1_cfg.at("matcher");
    ckpt.config_json = cj.dump();
    ckpt.params = copy_params(ps);
    save_checkpoint(path, ckpt);
    return ckpt;
  };

  for (int step = 0; step < ocfg.steps; ++step) {
    Rng step_rng = root.derive(0x57e20000ull + static_cast<std::uint64_t>(step));
    params.zero_grads();

    double loss_value = 0.0;
    for (int b = 0; b < ocfg.batch_size; ++b) {
      const SampleRecord& rec = *records[step_rng.next_below(records.size())];
      const Sample sample = dataset.load(rec);

      // Frozen stage 1 provides the depth prompt; no gradients flow into it.
      const MatcherRunResult init = run_matcher(matcher, matcher_params, sample);
      nn::Tensor<float> ir = raster_to_tensor(sample.ir_left);
      nn::Tensor<float> prompt = make_prompt_tensor(init.depth_init, rcfg.prompt_scale);
      nn::Tensor<float> pred = refiner.forward(params, ir, prompt);
      nn::Tensor<float> loss = stage2_loss_graph(pred, sample.depth_gt, rcfg.alpha);
      loss = nn::scale(loss, 1.0f / static_cast<float>(ocfg.batch_size));
      loss_value += loss.item();
      nn::backward(loss);
    }

    if (!std::isfinite(loss_value)) {
      save(last_good, last_good_step, out_dir / "stage2_last_finite.ckpt");
      throw RuntimeFailure("train_stage2: non-finite loss at step " + std::to_string(step) +
                           "; last finite checkpoint saved");
    }

    const double lr = schedule_lr(ocfg, step);
    const auto [norm, clipped] = clip_gradient_norm(params, ocfg.clip_norm);
    opt.step(params, lr, lr_mult);

    result.log.push_back({step, lr, loss_value, norm, clipped});
    if (step == 0) result.first_loss = loss_value;
    result.last_loss = loss_value;
    last_good = copy_params(params);
    last_good_step = static_cast<std::uint64_t>(step) + 1;
  }

  result.checkpoint =
      save(params, static_cast<std::uint64_t>(ocfg.steps), out_dir / "stage2.ckpt");
  write_loss_csv(out_dir / "stage2_loss.csv", result.log);
  return result;
}

ShardEvaluation evaluate_matcher(const Matcher<float>& matcher, nn::ParamStore<float>& params,
                                 const Dataset& dataset,
                                 const std::vector<const SampleRecord*>& records,
                                 const Refiner<float>* refiner,
                                 nn::ParamStore<float>* refiner_params) {
  if (records.empty()) throw ConfigError("evaluate_matcher: empty record list");
  ShardEvaluation eval;
  for (const SampleRecord* rec : records) {
    const Sample sample = dataset.load(*rec);
    const MatcherRunResult run = run_matcher(matcher, params, sample);
    const DisparityMap& gt_disp = mode_gt_disparity(sample, matcher.config().mode);
    DepthMap depth = run.depth_init;
    if (refiner && refiner_params) {
      depth = refine(sample.ir_left, run.depth_init, *refiner_params, *refiner);
    }
    eval.per_sample.push_back(
        compute_metrics(depth, sample.depth_gt, &run.disparity, &gt_disp));
  }
  eval.report = aggregate(eval.per_sample, AggregateWeighting::kPerImageMean);
  return eval;
}

}  // namespace nsl
