#pragma once

#include "nsl/geometry.hpp"
#include "nsl/nn/params.hpp"
#include "nsl/raster.hpp"

namespace nsl {

struct RefinerConfig {
  int backbone_width = 16;   // stem width; trunk tops out at 4x this
  double alpha = 0.5;        // gradient-loss weight
  int prompt_convs = 3;      // fixed by construction
  double prompt_scale = 3.0; // meters; depth prompt normalization constant

  void validate() const;
};

// Monocular encoder-decoder depth network with the stage-1 depth injected as
// an additive prompt at the 1/4-resolution decoder feature. The prompt path
// is 3 convolutions over [d_init / prompt_scale, validity]; with the prompt
// weights zeroed the output is exactly independent of d_init.
template <typename T>
class Refiner {
 public:
  explicit Refiner(RefinerConfig cfg);

  const RefinerConfig& config() const { return cfg_; }

  void init_params(nn::ParamStore<T>& ps, std::uint64_t seed) const;

  // ir: (1,H,W); prompt: (2,H,W) = normalized filled depth + validity.
  // Returns (1,H,W) positive metric depth.
  nn::Tensor<T> forward(nn::ParamStore<T>& ps, const nn::Tensor<T>& ir,
                        const nn::Tensor<T>& prompt) const;

 private:
  RefinerConfig cfg_;
};

// Axis-wise nearest-valid fill; returns the filled raster (invalid pixels in
// an all-invalid map become 0).
Raster<double> fill_invalid_nearest(const DepthMap& depth);

// Builds the 2-channel prompt tensor from a (possibly partial) initial depth.
nn::Tensor<float> make_prompt_tensor(const DepthMap& d_init, double prompt_scale);

// Raster-level inference.
DepthMap refine(const Raster<double>& ir_left, const DepthMap& d_init,
                nn::ParamStore<float>& ps, const Refiner<float>& refiner);

// mean|D - D_gt| + alpha * (mean|dx D - dx D_gt| + mean|dy D - dy D_gt|),
// forward differences; difference pairs with any invalid member are excluded.
double stage2_loss(const DepthMap& depth, const DepthMap& depth_gt, double alpha);

// Graph version of the same loss for training; `pred` is dense (1,H,W).
template <typename T>
nn::Tensor<T> stage2_loss_graph(const nn::Tensor<T>& pred, const DepthMap& depth_gt, double alpha);

}  // namespace nsl
