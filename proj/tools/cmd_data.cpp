#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>

#include <nlohmann/json.hpp>

#include "cli_common.hpp"
#include "nsl/dataset.hpp"
#include "nsl/patterns.hpp"
#include "nsl/png_io.hpp"

namespace nsl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

void register_gen_pattern(CLI::App& app) {
  auto* cmd = app.add_subcommand("gen-pattern",
                                 "Generate one structured-light pattern as 8-bit PNG + JSON "
                                 "sidecar");
  auto opts = std::make_shared<CommonOpts>();
  auto kind = std::make_shared<std::string>("sincos");
  auto width = std::make_shared<int>(160);
  auto height = std::make_shared<int>(96);
  auto params = std::make_shared<std::vector<std::string>>();
  auto out = std::make_shared<std::string>("pattern.png");
  opts->attach(cmd);
  cmd->add_option("--kind", *kind, "Pattern kind")->required();
  cmd->add_option("--width", *width, "Pattern width in px");
  cmd->add_option("--height", *height, "Pattern height in px");
  cmd->add_option("--param", *params, "Kind-specific parameter, e.g. --param period_x=8");
  cmd->add_option("--out", *out, "Output PNG path (sidecar gets .json)");

  cmd->callback([opts, kind, width, height, params, out]() {
    const RunConfig cfg = opts->load();
    apply_jobs(cfg);

    PatternSpec spec;
    spec.kind = pattern_kind_from_string(*kind);
    spec.width = *width;
    spec.height = *height;
    spec.seed = cfg.seed;
    for (const auto& kv : *params) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--param expects key=value: " + kv);
      spec.params[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
    }

    const PatternImage img = generate_pattern(spec);
    const fs::path png_path(*out);
    if (png_path.has_parent_path()) fs::create_directories(png_path.parent_path());
    write_png_gray8(png_path, img.intensities);

    json sidecar;
    sidecar["kind"] = to_string(spec.kind);
    sidecar["width"] = spec.width;
    sidecar["height"] = spec.height;
    sidecar["seed"] = spec.seed;
    sidecar["params"] = spec.params;
    fs::path json_path = png_path;
    json_path.replace_extension(".json");
    std::ofstream(json_path) << sidecar.dump(2) << '\n';
    std::printf("wrote %s and %s\n", png_path.string().c_str(), json_path.string().c_str());
  });
}

void register_gen_data(CLI::App& app) {
  auto* cmd = app.add_subcommand("gen-data", "Render a synthetic dataset tree with manifest");
  auto opts = std::make_shared<CommonOpts>();
  auto out = std::make_shared<std::string>();
  opts->attach(cmd);
  cmd->add_option("--out", *out, "Dataset root (default: paths.data_root)");

  cmd->callback([opts, out]() {
    const RunConfig cfg = opts->load();
    apply_jobs(cfg);
    const fs::path root = out->empty() ? resolve_cache_path(cfg.paths.data_root) : fs::path(*out);
    const DatasetManifest manifest =
        generate_dataset(root, cfg.dataset.train_samples, cfg.seed, cfg.dataset);
    std::printf("wrote %zu samples under %s\n", manifest.samples.size(), root.string().c_str());
  });
}

}  // namespace nsl::cli
