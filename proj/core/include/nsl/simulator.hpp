#pragma once

#include <Eigen/Core>
#include <optional>

#include "nsl/geometry.hpp"
#include "nsl/patterns.hpp"
#include "nsl/raster.hpp"
#include "nsl/scene.hpp"

namespace nsl {

struct RenderConfig {
  RigCalibration rig;
  PatternImage pattern;
  double noise_sigma = 0.01;  // additive Gaussian, intensity units
  double gamma = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class CameraView { kLeft, kRight };

// One labeled capture. All rasters share the left-camera dimensions; the
// disparity maps are consistent with depth_gt through depth_to_disparity.
struct Sample {
  Raster<double> ir_left;
  Raster<double> ir_right;
  PatternImage pattern_ref;
  DepthMap depth_gt;        // left view
  DisparityMap disp_gt_lp;  // left camera <-> projector
  DisparityMap disp_gt_lr;  // left camera <-> right camera
  RigCalibration rig;
  std::string pattern_id;
  std::uint64_t seed = 0;
};

struct Hit {
  double t = 0.0;
  Eigen::Vector3d point;
  Eigen::Vector3d normal;  // flipped toward the ray origin
  Material material;
};

// Nearest intersection with t > 1e-6, or nullopt.
std::optional<Hit> raycast(const Scene& scene, const Eigen::Vector3d& origin,
                           const Eigen::Vector3d& direction);

// Per pixel: primary ray; on hit, sample the pattern through the projector
// (bilinear, zero outside the frustum), zero the projector term if the
// shadow ray toward the projector is occluded, then
//   radiance = power * pattern * (albedo*max(0,n.l) + spec*max(0,r.v)^shiny) / dist^2
//            + ambient * albedo
// followed by gamma, additive Gaussian noise, and clamping to [0,1].
// Misses render as background 0 (plus noise).
Raster<double> render_ir(const Scene& scene, const RenderConfig& config, CameraView view);

// Per-pixel z-depth of the nearest hit; misses are invalid.
DepthMap render_ground_truth(const Scene& scene, const RigCalibration& rig, CameraView view);

// Renders both IR views, ground-truth depth and both disparity maps.
// Throws RuntimeFailure if nothing is visible from the left camera.
Sample render_sample(const Scene& scene, const RenderConfig& config);

}  // namespace nsl
