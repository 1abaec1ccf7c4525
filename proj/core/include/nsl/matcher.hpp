#pragma once

#include <string>
#include <vector>

#include "nsl/geometry.hpp"
#include "nsl/nn/params.hpp"
#include "nsl/raster.hpp"
#include "nsl/simulator.hpp"

namespace nsl {

enum class MatcherMode { kMono, kStereo, kBino };

const char* to_string(MatcherMode mode);
MatcherMode matcher_mode_from_string(const std::string& name);

struct MatcherConfig {
  MatcherMode mode = MatcherMode::kMono;
  int feature_dim = 64;
  int downsample = 4;  // fixed: features live at 1/4 resolution
  int pyramid_levels = 4;
  int iters_train = 12;
  int iters_eval = 8;
  int lookup_radius = 4;
  double loss_gamma = 0.9;
  // Desk-scale architecture knobs (context scales are fixed at 1/4, 1/8, 1/16).
  int encoder_base = 24;  // stem width; encoder trunk tops out at 2x this
  int hidden_dim = 48;    // GRU hidden width at every scale
  bool convex_upsampling = true;  // false selects the bilinear fallback

  void validate() const;
  int corr_channels() const {
    const int per_pyramid = pyramid_levels * (2 * lookup_radius + 1);
    return mode == MatcherMode::kBino ? 2 * per_pyramid : per_pyramid;
  }
};

// Inputs for one forward pass. The pattern tensor is required in mono/bino
// mode, the right image in stereo/bino mode. baseline_ratio = baseline_lp /
// baseline_lr converts the predicted camera-camera disparity into the
// camera-projector pyramid's index space (bino only).
template <typename T>
struct MatcherInput {
  nn::Tensor<T> ir_left;
  nn::Tensor<T> ir_right;  // stereo / bino
  nn::Tensor<T> pattern;   // mono / bino
  double baseline_ratio = 1.0;
};

template <typename T>
struct MatcherForward {
  std::vector<nn::Tensor<T>> disp_sequence;  // full resolution, length = iters
  std::vector<nn::Tensor<T>> deltas;         // per-iteration quarter-res updates
  nn::Tensor<T> disp_quarter;                // final estimate at 1/4 resolution
};

// Iterative feature-matching disparity estimator: shared-weight feature
// encoders per image pair, dot-product cost volume pyramid, and a 3-scale
// convolutional GRU that regresses disparity updates from sampled
// correlation features.
template <typename T>
class Matcher {
 public:
  explicit Matcher(MatcherConfig cfg);

  const MatcherConfig& config() const { return cfg_; }

  // Creates and seeds every parameter this architecture uses.
  void init_params(nn::ParamStore<T>& ps, std::uint64_t seed) const;

  MatcherForward<T> forward(nn::ParamStore<T>& ps, const MatcherInput<T>& input, int iters) const;

  // Feature encoder alone (1/4-resolution features), exposed for tests.
  // `which` selects the left-pattern ("lp") or left-right ("lr") encoder.
  nn::Tensor<T> encode_features(nn::ParamStore<T>& ps, const nn::Tensor<T>& image,
                                const std::string& which) const;

  // Multi-scale context features; returns {inp, hidden} per scale 1/4, 1/8, 1/16.
  struct ContextFeatures {
    std::vector<nn::Tensor<T>> inp;
    std::vector<nn::Tensor<T>> hidden;
  };
  ContextFeatures encode_context(nn::ParamStore<T>& ps, const nn::Tensor<T>& left) const;

 private:
  MatcherConfig cfg_;
};

// Eq.-style weighted L1 sequence loss: sum_t gamma^(N-t) * mean_valid |d_t - gt|.
template <typename T>
nn::Tensor<T> sequence_loss(const std::vector<nn::Tensor<T>>& sequence, const DisparityMap& gt,
                            double gamma);

// 4-level average-pooled pyramid of a full cost volume (level 0 is the input).
template <typename T>
std::vector<nn::Tensor<T>> build_pyramid(const nn::Tensor<T>& volume, int levels);

// ---- Raster-level wrappers (float weights, no gradients) ----

struct MatcherRunResult {
  DisparityMap disparity;  // full resolution, prediction mask all-valid
  DepthMap depth_init;     // via the mode's baseline
  std::vector<Raster<double>> sequence;  // all N full-resolution estimates
};

nn::Tensor<float> raster_to_tensor(const Raster<double>& raster);

// Runs the matcher on a sample with `iters` GRU iterations (0 picks the
// config's eval count). Throws ConfigError if the sample lacks the mode's
// required inputs.
MatcherRunResult run_matcher(const Matcher<float>& matcher, nn::ParamStore<float>& ps,
                             const Sample& sample, int iters = 0);

}  // namespace nsl
