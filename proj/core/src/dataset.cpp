#include "nsl/dataset.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "nsl/error.hpp"
#include "nsl/pfm.hpp"
#include "nsl/png_io.hpp"
#include "nsl/rng.hpp"

namespace nsl {

using nlohmann::json;

void DatasetConfig::validate() const {
  if (width < 16 || height < 16) throw ConfigError("dataset: resolution too small");
  if (train_samples < 1) throw ConfigError("dataset: train_samples must be >= 1");
  if (val_samples < 0 || test_pattern_samples < 0) throw ConfigError("dataset: negative count");
  if (noise_sigma < 0.0 || gamma <= 0.0) throw ConfigError("dataset: bad render settings");
  if (focal_min <= 0.0 || focal_max < focal_min) throw ConfigError("dataset: bad focal range");
  if (baseline_lr_min <= 0.0 || baseline_lr_max < baseline_lr_min ||
      baseline_lp_min <= 0.0 || baseline_lp_max < baseline_lp_min) {
    throw ConfigError("dataset: bad baseline range");
  }
}

namespace {

std::uint64_t fnv1a_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptSampleError("missing file: " + path.string());
  std::uint64_t h = 1469598103934665603ull;
  char buf[8192];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!in) break;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json rig_to_json(const RigCalibration& rig) {
  json j;
  j["fx"] = rig.cam_left.fx;
  j["fy"] = rig.cam_left.fy;
  j["cx"] = rig.cam_left.cx;
  j["cy"] = rig.cam_left.cy;
  j["width"] = rig.cam_left.width;
  j["height"] = rig.cam_left.height;
  j["baseline_lr"] = rig.baseline_lr;
  j["baseline_lp"] = rig.baseline_lp;
  return j;
}

RigCalibration rig_from_json(const json& j) {
  RigCalibration rig;
  Intrinsics k;
  k.fx = j.at("fx").get<double>();
  k.fy = j.at("fy").get<double>();
  k.cx = j.at("cx").get<double>();
  k.cy = j.at("cy").get<double>();
  k.width = j.at("width").get<int>();
  k.height = j.at("height").get<int>();
  rig.cam_left = rig.cam_right = rig.projector = k;
  rig.baseline_lr = j.at("baseline_lr").get<double>();
  rig.baseline_lp = j.at("baseline_lp").get<double>();
  rig.validate();
  return rig;
}

const char* kSampleFiles[] = {"ir_left.png", "ir_right.png", "pattern.png", "depth.pfm",
                              "disp_lp.pfm", "disp_lr.pfm", "mask.png"};

}  // namespace

void write_sample(const std::filesystem::path& dir, const Sample& sample) {
  namespace fs = std::filesystem;
  const fs::path tmp = dir.string() + ".tmp";
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  write_png_gray16(tmp / "ir_left.png", sample.ir_left);
  write_png_gray16(tmp / "ir_right.png", sample.ir_right);
  write_png_gray16(tmp / "pattern.png", sample.pattern_ref.intensities);
  write_pfm(tmp / "depth.pfm", sample.depth_gt.values);
  write_pfm(tmp / "disp_lp.pfm", sample.disp_gt_lp.values);
  write_pfm(tmp / "disp_lr.pfm", sample.disp_gt_lr.values);
  write_png_mask(tmp / "mask.png", sample.depth_gt.mask);

  json meta;
  meta["pattern_id"] = sample.pattern_id;
  meta["seed"] = sample.seed;
  meta["width"] = sample.ir_left.width();
  meta["height"] = sample.ir_left.height();
  meta["rig"] = rig_to_json(sample.rig);
  json checksums = json::object();
  for (const char* f : kSampleFiles) checksums[f] = hash_hex(fnv1a_file(tmp / f));
  meta["checksums"] = checksums;
  std::ofstream(tmp / "meta.json") << meta.dump(2) << '\n';

  fs::remove_all(dir);
  fs::rename(tmp, dir);
}

Sample read_sample(const std::filesystem::path& dir) {
  json meta;
  {
    std::ifstream in(dir / "meta.json");
    if (!in) throw CorruptSampleError("read_sample: missing meta.json in " + dir.string());
    try {
      in >> meta;
    } catch (const json::exception& e) {
      throw CorruptSampleError("read_sample: bad meta.json: " + std::string(e.what()));
    }
  }
  for (const char* f : kSampleFiles) {
    const std::string expected = meta.at("checksums").at(f).get<std::string>();
    if (hash_hex(fnv1a_file(dir / f)) != expected) {
      throw CorruptSampleError("read_sample: checksum mismatch for " + (dir / f).string());
    }
  }

  Sample sample;
  sample.ir_left = read_png_gray16(dir / "ir_left.png");
  sample.ir_right = read_png_gray16(dir / "ir_right.png");
  sample.pattern_ref.intensities = read_png_gray16(dir / "pattern.png");
  sample.depth_gt.values = read_pfm(dir / "depth.pfm");
  sample.disp_gt_lp.values = read_pfm(dir / "disp_lp.pfm");
  sample.disp_gt_lr.values = read_pfm(dir / "disp_lr.pfm");
  const ValidityMask mask = read_png_mask(dir / "mask.png");
  sample.depth_gt.mask = mask;
  sample.disp_gt_lp.mask = mask;
  sample.disp_gt_lr.mask = mask;
  sample.pattern_id = meta.at("pattern_id").get<std::string>();
  sample.seed = meta.at("seed").get<std::uint64_t>();
  sample.rig = rig_from_json(meta.at("rig"));

  const int w = meta.at("width").get<int>();
  const int h = meta.at("height").get<int>();
  for (const auto* r : {&sample.ir_left, &sample.ir_right, &sample.pattern_ref.intensities,
                        &sample.depth_gt.values, &sample.disp_gt_lp.values,
                        &sample.disp_gt_lr.values}) {
    if (r->width() != w || r->height() != h) {
      throw CorruptSampleError("read_sample: shape mismatch in " + dir.string());
    }
  }
  if (mask.width() != w || mask.height() != h) {
    throw CorruptSampleError("read_sample: mask shape mismatch in " + dir.string());
  }
  return sample;
}

std::string manifest_to_json(const DatasetManifest& manifest) {
  json j;
  j["version"] = manifest.version;
  j["width"] = manifest.width;
  j["height"] = manifest.height;
  j["pattern_split"] = {{"train", manifest.train_patterns}, {"test", manifest.test_patterns}};
  j["samples"] = json::array();
  for (const auto& s : manifest.samples) {
    json sj;
    sj["id"] = s.id;
    sj["path"] = s.rel_path;
    sj["pattern"] = s.pattern;
    sj["pattern_seed"] = s.pattern_seed;
    sj["seed"] = s.seed;
    sj["difficulty"] = s.difficulty;
    sj["split"] = s.split;
    sj["rig"] = rig_to_json(s.rig);
    j["samples"].push_back(sj);
  }
  return j.dump(2);
}

DatasetManifest manifest_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw CorruptSampleError("manifest: parse error: " + std::string(e.what()));
  }
  DatasetManifest m;
  m.version = j.at("version").get<int>();
  if (m.version != 1) throw CorruptSampleError("manifest: unsupported version");
  m.width = j.at("width").get<int>();
  m.height = j.at("height").get<int>();
  m.train_patterns = j.at("pattern_split").at("train").get<std::vector<std::string>>();
  m.test_patterns = j.at("pattern_split").at("test").get<std::vector<std::string>>();
  for (const auto& sj : j.at("samples")) {
    SampleRecord r;
    r.id = sj.at("id").get<std::string>();
    r.rel_path = sj.at("path").get<std::string>();
    r.pattern = sj.at("pattern").get<std::string>();
    r.pattern_seed = sj.at("pattern_seed").get<std::uint64_t>();
    r.seed = sj.at("seed").get<std::uint64_t>();
    r.difficulty = sj.at("difficulty").get<std::string>();
    r.split = sj.at("split").get<std::string>();
    r.rig = rig_from_json(sj.at("rig"));
    m.samples.push_back(r);
  }
  // Split declaration sanity.
  for (const auto& t : m.test_patterns) {
    for (const auto& tr : m.train_patterns) {
      if (t == tr) throw CorruptSampleError("manifest: train/test patterns overlap");
    }
  }
  return m;
}

namespace {

RigCalibration jitter_rig(Rng& rng, const DatasetConfig& cfg) {
  RigCalibration rig;
  Intrinsics k;
  k.fx = rng.uniform(cfg.focal_min, cfg.focal_max);
  k.fy = k.fx;
  k.cx = cfg.width / 2.0;
  k.cy = cfg.height / 2.0;
  k.width = cfg.width;
  k.height = cfg.height;
  rig.cam_left = rig.cam_right = rig.projector = k;
  rig.baseline_lr = rng.uniform(cfg.baseline_lr_min, cfg.baseline_lr_max);
  rig.baseline_lp = rng.uniform(cfg.baseline_lp_min, cfg.baseline_lp_max);
  return rig;
}

}  // namespace

DatasetManifest generate_dataset(const std::filesystem::path& root, int n_train,
                                 std::uint64_t seed, const DatasetConfig& config) {
  config.validate();
  if (n_train < 1) throw ConfigError("generate_dataset: n must be >= 1");
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(root / "samples", ec);
  if (ec) throw RuntimeFailure("generate_dataset: cannot create " + root.string());

  DatasetManifest manifest;
  manifest.width = config.width;
  manifest.height = config.height;
  for (PatternKind k : kTrainPatternKinds) manifest.train_patterns.push_back(to_string(k));
  for (PatternKind k : kTestPatternKinds) manifest.test_patterns.push_back(to_string(k));

  const int total = n_train + config.val_samples + config.test_pattern_samples;
  const Rng root_rng(seed);
  const SceneDifficulty difficulties[4] = {SceneDifficulty::kEasy, SceneDifficulty::kTextured,
                                           SceneDifficulty::kSpecular,
                                           SceneDifficulty::kOcclusion};

  manifest.samples.resize(total);
  for (int i = 0; i < total; ++i) {
    Rng rng = root_rng.derive(0xda7a0000ull + static_cast<std::uint64_t>(i));
    SampleRecord& rec = manifest.samples[i];
    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "%06d", i);
    rec.id = idbuf;
    rec.rel_path = std::string("samples/") + idbuf;
    rec.split = i < n_train                        ? "train"
                : i < n_train + config.val_samples ? "val"
                                                   : "test_pattern";
    const bool test_shard = rec.split == "test_pattern";
    const auto& pool = test_shard ? manifest.test_patterns : manifest.train_patterns;
    rec.pattern = pool[rng.next_below(pool.size())];
    rec.pattern_seed = rng.next_u64();
    rec.seed = rng.next_u64();
    rec.difficulty = to_string(difficulties[rng.next_below(4)]);
    rec.rig = jitter_rig(rng, config);
  }

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < total; ++i) {
    const SampleRecord& rec = manifest.samples[i];
    PatternSpec pspec;
    pspec.kind = pattern_kind_from_string(rec.pattern);
    pspec.width = config.width;
    pspec.height = config.height;
    pspec.seed = rec.pattern_seed;

    RenderConfig rcfg;
    rcfg.rig = rec.rig;
    rcfg.pattern = generate_pattern(pspec);
    rcfg.noise_sigma = config.noise_sigma;
    rcfg.gamma = config.gamma;
    rcfg.seed = rec.seed;

    const Scene scene = random_scene(rec.seed, scene_difficulty_from_string(rec.difficulty));
    Sample sample = render_sample(scene, rcfg);
    sample.pattern_id = rec.pattern;
    write_sample(root / rec.rel_path, sample);
  }

  std::ofstream(root / "manifest.json") << manifest_to_json(manifest) << '\n';
  return manifest;
}

Dataset Dataset::open(const std::filesystem::path& root) {
  std::ifstream in(root / "manifest.json");
  if (!in) throw CorruptSampleError("dataset: missing manifest in " + root.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  Dataset ds;
  ds.root_ = root;
  ds.manifest_ = manifest_from_json(text);

  std::unordered_set<std::string> ids;
  for (const auto& rec : ds.manifest_.samples) {
    if (!ids.insert(rec.id).second) throw CorruptSampleError("dataset: duplicate id " + rec.id);
    if (!std::filesystem::exists(root / rec.rel_path / "meta.json")) {
      throw CorruptSampleError("dataset: missing sample " + rec.rel_path);
    }
  }
  return ds;
}

std::vector<const SampleRecord*> Dataset::split(const std::string& name) const {
  std::vector<const SampleRecord*> out;
  for (const auto& rec : manifest_.samples) {
    if (rec.split == name) out.push_back(&rec);
  }
  return out;
}

Sample Dataset::load(const SampleRecord& record) const {
  Sample s = read_sample(root_ / record.rel_path);
  s.pattern_id = record.pattern;
  return s;
}

}  // namespace nsl
