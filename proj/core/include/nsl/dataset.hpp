#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nsl/simulator.hpp"

namespace nsl {

// Desk-scale dataset generation knobs. Rig parameters are jittered per sample
// within the declared ranges; fy/cx/cy follow fx and the image center.
struct DatasetConfig {
  int width = 160;
  int height = 96;
  int train_samples = 512;
  int val_samples = 64;
  int test_pattern_samples = 64;
  double noise_sigma = 0.01;
  double gamma = 1.0;
  double focal_min = 130.0;
  double focal_max = 150.0;
  double baseline_lr_min = 0.075;
  double baseline_lr_max = 0.090;
  double baseline_lp_min = 0.045;
  double baseline_lp_max = 0.055;

  void validate() const;
};

struct SampleRecord {
  std::string id;
  std::string rel_path;  // directory relative to the dataset root
  std::string pattern;   // pattern kind name
  std::uint64_t pattern_seed = 0;
  std::uint64_t seed = 0;  // render/scene seed
  std::string difficulty;
  std::string split;  // "train" | "val" | "test_pattern"
  RigCalibration rig;
};

struct DatasetManifest {
  int version = 1;
  int width = 0;
  int height = 0;
  std::vector<std::string> train_patterns;
  std::vector<std::string> test_patterns;
  std::vector<SampleRecord> samples;
};

// Lossless sample tree: IR and pattern as 16-bit grayscale PNG, float rasters
// as PFM, validity as 8-bit PNG, metadata+checksums as JSON. Writes are
// atomic (temp dir + rename).
void write_sample(const std::filesystem::path& dir, const Sample& sample);
Sample read_sample(const std::filesystem::path& dir);

// Renders n_train + config.val_samples + config.test_pattern_samples samples
// under <root>/samples/, writes <root>/manifest.json, and returns the
// manifest. Training and validation shards draw uniformly from the six
// training pattern kinds; the test shard uses the two held-out kinds.
// Byte-reproducible for a fixed (n_train, seed, config).
DatasetManifest generate_dataset(const std::filesystem::path& root, int n_train,
                                 std::uint64_t seed, const DatasetConfig& config);

std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const std::string& text);

// Loaded dataset handle; iteration order is manifest order.
class Dataset {
 public:
  static Dataset open(const std::filesystem::path& root);

  const DatasetManifest& manifest() const { return manifest_; }
  const std::filesystem::path& root() const { return root_; }

  std::vector<const SampleRecord*> split(const std::string& name) const;
  Sample load(const SampleRecord& record) const;

 private:
  std::filesystem::path root_;
  DatasetManifest manifest_;
};

}  // namespace nsl
