#include "nsl/geometry.hpp"

#include <cmath>

#include "nsl/error.hpp"

namespace nsl {

void Intrinsics::validate() const {
  if (fx <= 0.0 || fy <= 0.0) throw ConfigError("intrinsics: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw ConfigError("intrinsics: dimensions must be positive");
  if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height) {
    throw ConfigError("intrinsics: principal point outside image");
  }
}

void RigCalibration::validate() const {
  cam_left.validate();
  cam_right.validate();
  projector.validate();
  if (baseline_lr <= 0.0 || baseline_lp <= 0.0) {
    throw ConfigError("rig: baselines must be positive");
  }
  // Row-aligned epipolar geometry needs a shared vertical axis.
  if (cam_left.fy != cam_right.fy || cam_left.fy != projector.fy ||
      cam_left.cy != cam_right.cy || cam_left.cy != projector.cy) {
    throw ConfigError("rig: cameras and projector must share fy and cy");
  }
}

DepthMap disparity_to_depth(const DisparityMap& d, double focal_px, double baseline_m) {
  if (focal_px <= 0.0 || baseline_m <= 0.0) {
    throw ConfigError("disparity_to_depth: focal length and baseline must be positive");
  }
  DepthMap out(d.values.width(), d.values.height());
  const double fb = focal_px * baseline_m;
  for (int y = 0; y < d.values.height(); ++y) {
    for (int x = 0; x < d.values.width(); ++x) {
      const double disp = d.values(x, y);
      if (d.mask.at(x, y) && disp > kDisparityEpsilon) {
        out.values(x, y) = fb / disp;
        out.mask.set(x, y, true);
      }
    }
  }
  return out;
}

DisparityMap depth_to_disparity(const DepthMap& z, double focal_px, double baseline_m) {
  if (focal_px <= 0.0 || baseline_m <= 0.0) {
    throw ConfigError("depth_to_disparity: focal length and baseline must be positive");
  }
  DisparityMap out(z.values.width(), z.values.height());
  const double fb = focal_px * baseline_m;
  for (int y = 0; y < z.values.height(); ++y) {
    for (int x = 0; x < z.values.width(); ++x) {
      const double depth = z.values(x, y);
      if (z.mask.at(x, y) && depth > 0.0 && std::isfinite(depth)) {
        out.values(x, y) = fb / depth;
        out.mask.set(x, y, true);
      }
    }
  }
  return out;
}

std::vector<Eigen::Vector3d> depth_to_pointcloud(const DepthMap& z, const Intrinsics& k) {
  k.validate();
  std::vector<Eigen::Vector3d> points;
  points.reserve(z.mask.count());
  for (int v = 0; v < z.values.height(); ++v) {
    for (int u = 0; u < z.values.width(); ++u) {
      if (!z.mask.at(u, v)) continue;
      const double depth = z.values(u, v);
      points.emplace_back((u - k.cx) * depth / k.fx, (v - k.cy) * depth / k.fy, depth);
    }
  }
  return points;
}

}  // namespace nsl
