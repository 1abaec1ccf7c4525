#pragma once

#include <Eigen/Core>
#include <vector>

#include "nsl/raster.hpp"

namespace nsl {

struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  void validate() const;
};

// Rectified rig: left camera at the origin, right camera and projector at
// positive x offsets, all optical axes parallel to +z and row-aligned.
// Disparity is x_left - x_counterpart, nonnegative for finite depth.
struct RigCalibration {
  Intrinsics cam_left;
  Intrinsics cam_right;
  Intrinsics projector;
  double baseline_lr = 0.0;  // meters, left camera -> right camera
  double baseline_lp = 0.0;  // meters, left camera -> projector

  void validate() const;
};

struct DepthMap {
  Raster<double> values;  // meters, z-depth along the optical axis
  ValidityMask mask;

  DepthMap() = default;
  DepthMap(int width, int height) : values(width, height), mask(width, height) {}
};

struct DisparityMap {
  Raster<double> values;  // pixels
  ValidityMask mask;

  DisparityMap() = default;
  DisparityMap(int width, int height) : values(width, height), mask(width, height) {}
};

// Disparities at or below this are treated as degenerate (point at infinity).
inline constexpr double kDisparityEpsilon = 1e-6;

// Z = f*B/d. Pixels with d <= kDisparityEpsilon or invalid input become
// invalid rather than erroring.
DepthMap disparity_to_depth(const DisparityMap& d, double focal_px, double baseline_m);

// d = f*B/Z. Nonpositive or invalid depths become invalid.
DisparityMap depth_to_disparity(const DepthMap& z, double focal_px, double baseline_m);

// Back-projects every valid pixel through the pinhole model. One point per
// valid pixel, row-major order.
std::vector<Eigen::Vector3d> depth_to_pointcloud(const DepthMap& z, const Intrinsics& k);

}  // namespace nsl
