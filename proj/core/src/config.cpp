#include "nsl/config.hpp"

#include <cstdlib>
#include <fstream>

#include <nlohmann/json.hpp>

#include "nsl/error.hpp"

namespace nsl {

using nlohmann::json;

BlockMatchConfig RunConfig::block_match_config() const {
  BlockMatchConfig cfg;
  cfg.window = block_match.window;
  cfg.max_disp = block_match.max_disp;
  if (block_match.metric == "zncc") {
    cfg.metric = MatchMetric::kZncc;
  } else if (block_match.metric == "sad") {
    cfg.metric = MatchMetric::kSad;
  } else {
    throw ConfigError("block_match.metric must be 'zncc' or 'sad'");
  }
  cfg.lrc_tol = block_match.lrc_tol;
  cfg.min_texture = block_match.min_texture;
  return cfg;
}

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.stage2_optim.lr = 1e-4;
  cfg.stage2_optim.schedule = "warmup_constant";
  cfg.stage2_optim.warmup_steps = 100;
  cfg.stage2_optim.steps = 1200;
  cfg.stage2_optim.clip_norm = 0.0;
  return cfg;
}

namespace {

json optim_to_json(const OptimConfig& o) {
  return json{{"lr", o.lr},
              {"weight_decay", o.weight_decay},
              {"beta1", o.beta1},
              {"beta2", o.beta2},
              {"adam_eps", o.adam_eps},
              {"clip_norm", o.clip_norm},
              {"steps", o.steps},
              {"batch_size", o.batch_size},
              {"schedule", o.schedule},
              {"onecycle_pct_start", o.onecycle_pct_start},
              {"onecycle_div_factor", o.onecycle_div_factor},
              {"onecycle_final_div", o.onecycle_final_div},
              {"warmup_steps", o.warmup_steps},
              {"backbone_lr_ratio", o.backbone_lr_ratio},
              {"augment", o.augment}};
}

void optim_from_json(const json& j, OptimConfig& o) {
  o.lr = j.at("lr").get<double>();
  o.weight_decay = j.at("weight_decay").get<double>();
  o.beta1 = j.at("beta1").get<double>();
  o.beta2 = j.at("beta2").get<double>();
  o.adam_eps = j.at("adam_eps").get<double>();
  o.clip_norm = j.at("clip_norm").get<double>();
  o.steps = j.at("steps").get<int>();
  o.batch_size = j.at("batch_size").get<int>();
  o.schedule = j.at("schedule").get<std::string>();
  o.onecycle_pct_start = j.at("onecycle_pct_start").get<double>();
  o.onecycle_div_factor = j.at("onecycle_div_factor").get<double>();
  o.onecycle_final_div = j.at("onecycle_final_div").get<double>();
  o.warmup_steps = j.at("warmup_steps").get<int>();
  o.backbone_lr_ratio = j.at("backbone_lr_ratio").get<double>();
  o.augment = j.at("augment").get<bool>();
}

json config_to_json_tree(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["jobs"] = cfg.jobs;
  j["paths"] = {{"data_root", cfg.paths.data_root},
                {"checkpoint_dir", cfg.paths.checkpoint_dir},
                {"output_dir", cfg.paths.output_dir}};
  j["dataset"] = {{"width", cfg.dataset.width},
                  {"height", cfg.dataset.height},
                  {"train_samples", cfg.dataset.train_samples},
                  {"val_samples", cfg.dataset.val_samples},
                  {"test_pattern_samples", cfg.dataset.test_pattern_samples},
                  {"noise_sigma", cfg.dataset.noise_sigma},
                  {"gamma", cfg.dataset.gamma},
                  {"focal_min", cfg.dataset.focal_min},
                  {"focal_max", cfg.dataset.focal_max},
                  {"baseline_lr_min", cfg.dataset.baseline_lr_min},
                  {"baseline_lr_max", cfg.dataset.baseline_lr_max},
                  {"baseline_lp_min", cfg.dataset.baseline_lp_min},
                  {"baseline_lp_max", cfg.dataset.baseline_lp_max}};
  j["matcher"] = json::parse(matcher_config_to_json(cfg.matcher));
  j["refiner"] = json::parse(refiner_config_to_json(cfg.refiner));
  j["stage1_optim"] = optim_to_json(cfg.stage1_optim);
  j["stage2_optim"] = optim_to_json(cfg.stage2_optim);
  j["block_match"] = {{"window", cfg.block_match.window},
                      {"max_disp", cfg.block_match.max_disp},
                      {"metric", cfg.block_match.metric},
                      {"lrc_tol", cfg.block_match.lrc_tol},
                      {"min_texture", cfg.block_match.min_texture},
                      {"outlier_grad_thresh", cfg.block_match.outlier_grad_thresh},
                      {"temporal_k", cfg.block_match.temporal_k}};
  return j;
}

RunConfig config_from_json_tree(const json& j) {
  RunConfig cfg;
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.jobs = j.at("jobs").get<int>();
  const auto& p = j.at("paths");
  cfg.paths.data_root = p.at("data_root").get<std::string>();
  cfg.paths.checkpoint_dir = p.at("checkpoint_dir").get<std::string>();
  cfg.paths.output_dir = p.at("output_dir").get<std::string>();
  const auto& d = j.at("dataset");
  cfg.dataset.width = d.at("width").get<int>();
  cfg.dataset.height = d.at("height").get<int>();
  cfg.dataset.train_samples = d.at("train_samples").get<int>();
  cfg.dataset.val_samples = d.at("val_samples").get<int>();
  cfg.dataset.test_pattern_samples = d.at("test_pattern_samples").get<int>();
  cfg.dataset.noise_sigma = d.at("noise_sigma").get<double>();
  cfg.dataset.gamma = d.at("gamma").get<double>();
  cfg.dataset.focal_min = d.at("focal_min").get<double>();
  cfg.dataset.focal_max = d.at("focal_max").get<double>();
  cfg.dataset.baseline_lr_min = d.at("baseline_lr_min").get<double>();
  cfg.dataset.baseline_lr_max = d.at("baseline_lr_max").get<double>();
  cfg.dataset.baseline_lp_min = d.at("baseline_lp_min").get<double>();
  cfg.dataset.baseline_lp_max = d.at("baseline_lp_max").get<double>();
  cfg.matcher = matcher_config_from_json(j.at("matcher").dump());
  cfg.refiner = refiner_config_from_json(j.at("refiner").dump());
  optim_from_json(j.at("stage1_optim"), cfg.stage1_optim);
  optim_from_json(j.at("stage2_optim"), cfg.stage2_optim);
  const auto& b = j.at("block_match");
  cfg.block_match.window = b.at("window").get<int>();
  cfg.block_match.max_disp = b.at("max_disp").get<int>();
  cfg.block_match.metric = b.at("metric").get<std::string>();
  cfg.block_match.lrc_tol = b.at("lrc_tol").get<double>();
  cfg.block_match.min_texture = b.at("min_texture").get<double>();
  cfg.block_match.outlier_grad_thresh = b.at("outlier_grad_thresh").get<double>();
  cfg.block_match.temporal_k = b.at("temporal_k").get<int>();
  return cfg;
}

// Every key in `input` must exist in `schema` with a compatible type.
void validate_against_schema(const json& input, const json& schema, const std::string& prefix) {
  if (!input.is_object()) {
    throw ConfigError("config: expected object at " + (prefix.empty() ? "root" : prefix));
  }
  for (const auto& [key, value] : input.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!schema.contains(key)) throw ConfigError("config: unknown key '" + path + "'");
    const json& expect = schema.at(key);
    if (expect.is_object()) {
      validate_against_schema(value, expect, path);
    } else if (expect.is_string() != value.is_string() ||
               expect.is_boolean() != value.is_boolean() ||
               (expect.is_number() && !value.is_number())) {
      throw ConfigError("config: type mismatch at '" + path + "'");
    } else if (!expect.is_string() && !expect.is_boolean() && !expect.is_number()) {
      throw ConfigError("config: unsupported schema entry at '" + path + "'");
    } else if (!value.is_string() && !value.is_boolean() && !value.is_number()) {
      throw ConfigError("config: unsupported value at '" + path + "'");
    }
  }
}

void merge_into(json& base, const json& overlay) {
  for (const auto& [key, value] : overlay.items()) {
    if (value.is_object()) {
      merge_into(base.at(key), value);
    } else {
      base[key] = value;
    }
  }
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  json overlay;
  try {
    in >> overlay;
  } catch (const json::exception& e) {
    throw ConfigError("config: parse error in " + path.string() + ": " + e.what());
  }
  json base = config_to_json_tree(default_run_config());
  validate_against_schema(overlay, base, "");
  merge_into(base, overlay);
  return config_from_json_tree(base);
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("--set expects key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  json tree = config_to_json_tree(cfg);
  json* node = &tree;
  std::size_t start = 0;
  std::vector<std::string> parts;
  while (true) {
    const auto dot = key.find('.', start);
    parts.push_back(key.substr(start, dot == std::string::npos ? dot : dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i]) || !(*node)[parts[i]].is_object()) {
      throw ConfigError("--set: unknown key '" + key + "'");
    }
    node = &(*node)[parts[i]];
  }
  const std::string& leaf = parts.back();
  if (!node->contains(leaf)) throw ConfigError("--set: unknown key '" + key + "'");
  json& slot = (*node)[leaf];
  if (slot.is_object()) throw ConfigError("--set: '" + key + "' is not a leaf");

  if (slot.is_string()) {
    slot = value;
  } else if (slot.is_boolean()) {
    if (value == "true" || value == "1") {
      slot = true;
    } else if (value == "false" || value == "0") {
      slot = false;
    } else {
      throw ConfigError("--set: expected boolean for '" + key + "'");
    }
  } else {
    try {
      slot = json::parse(value);
    } catch (const json::exception&) {
      throw ConfigError("--set: expected number for '" + key + "'");
    }
    if (!slot.is_number()) throw ConfigError("--set: expected number for '" + key + "'");
  }
  cfg = config_from_json_tree(tree);
}

std::string run_config_to_json(const RunConfig& cfg) { return config_to_json_tree(cfg).dump(2); }

std::filesystem::path resolve_cache_path(const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_absolute()) return p;
  if (const char* cache = std::getenv("NSL_LAB_CACHE"); cache && *cache) {
    return std::filesystem::path(cache) / p;
  }
  return p;
}

}  // namespace nsl
