#include "nsl/matcher_impl.hpp"

namespace nsl {

const char* to_string(MatcherMode mode) {
  switch (mode) {
    case MatcherMode::kMono: return "mono";
    case MatcherMode::kStereo: return "stereo";
    case MatcherMode::kBino: return "bino";
  }
  throw ConfigError("unknown matcher mode");
}

MatcherMode matcher_mode_from_string(const std::string& name) {
  if (name == "mono") return MatcherMode::kMono;
  if (name == "stereo") return MatcherMode::kStereo;
  if (name == "bino") return MatcherMode::kBino;
  throw ConfigError("unknown matcher mode: " + name);
}

void MatcherConfig::validate() const {
  if (downsample != 4) throw ConfigError("matcher: downsample is fixed at 4");
  if (pyramid_levels < 1) throw ConfigError("matcher: pyramid_levels must be >= 1");
  if (iters_train < 1 || iters_eval < 1) throw ConfigError("matcher: iterations must be >= 1");
  if (lookup_radius < 0) throw ConfigError("matcher: lookup_radius must be >= 0");
  if (feature_dim < 1 || encoder_base < 2 || hidden_dim < 4) {
    throw ConfigError("matcher: channel widths too small");
  }
  if (loss_gamma <= 0.0 || loss_gamma > 1.0) throw ConfigError("matcher: loss_gamma in (0,1]");
}

template class Matcher<float>;
template class Matcher<double>;
template nn::Tensor<float> sequence_loss(const std::vector<nn::Tensor<float>>&,
                                         const DisparityMap&, double);
template nn::Tensor<double> sequence_loss(const std::vector<nn::Tensor<double>>&,
                                          const DisparityMap&, double);
template std::vector<nn::Tensor<float>> build_pyramid(const nn::Tensor<float>&, int);
template std::vector<nn::Tensor<double>> build_pyramid(const nn::Tensor<double>&, int);

nn::Tensor<float> raster_to_tensor(const Raster<double>& raster) {
  nn::Tensor<float> t = nn::Tensor<float>::leaf({1, raster.height(), raster.width()});
  for (int y = 0; y < raster.height(); ++y) {
    const double* src = raster.row(y);
    for (int x = 0; x < raster.width(); ++x) {
      t.value()[static_cast<std::size_t>(y) * raster.width() + x] = static_cast<float>(src[x]);
    }
  }
  return t;
}

namespace {

Raster<double> tensor_plane_to_raster(const nn::Tensor<float>& t) {
  const int h = t.dim(1);
  const int w = t.dim(2);
  Raster<double> out(w, h);
  for (int y = 0; y < h; ++y) {
    double* dst = out.row(y);
    for (int x = 0; x < w; ++x) dst[x] = t.value()[static_cast<std::size_t>(y) * w + x];
  }
  return out;
}

}  // namespace

MatcherRunResult run_matcher(const Matcher<float>& matcher, nn::ParamStore<float>& ps,
                             const Sample& sample, int iters) {
  const MatcherConfig& cfg = matcher.config();
  if (iters <= 0) iters = cfg.iters_eval;

  MatcherInput<float> input;
  input.ir_left = raster_to_tensor(sample.ir_left);
  if (cfg.mode != MatcherMode::kMono) {
    if (sample.ir_right.empty()) throw ConfigError("run_matcher: sample lacks right image");
    input.ir_right = raster_to_tensor(sample.ir_right);
  }
  if (cfg.mode != MatcherMode::kStereo) {
    if (sample.pattern_ref.intensities.empty()) {
      throw ConfigError("run_matcher: sample lacks pattern image");
    }
    if (sample.pattern_ref.width() != sample.ir_left.width() ||
        sample.pattern_ref.height() != sample.ir_left.height()) {
      throw ConfigError("run_matcher: pattern/image dimensions differ");
    }
    input.pattern = raster_to_tensor(sample.pattern_ref.intensities);
  }
  input.baseline_ratio = sample.rig.baseline_lp / sample.rig.baseline_lr;

  MatcherForward<float> fwd = matcher.forward(ps, input, iters);

  MatcherRunResult result;
  result.sequence.reserve(fwd.disp_sequence.size());
  for (const auto& t : fwd.disp_sequence) result.sequence.push_back(tensor_plane_to_raster(t));

  result.disparity.values = result.sequence.back();
  result.disparity.mask =
      ValidityMask(result.disparity.values.width(), result.disparity.values.height(), true);
  const double baseline =
      cfg.mode == MatcherMode::kMono ? sample.rig.baseline_lp : sample.rig.baseline_lr;
  result.depth_init = disparity_to_depth(result.disparity, sample.rig.cam_left.fx, baseline);
  return result;
}

}  // namespace nsl
