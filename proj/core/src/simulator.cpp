#include "nsl/simulator.hpp"

#include <cmath>

#include "nsl/error.hpp"
#include "nsl/rng.hpp"

namespace nsl {

void RenderConfig::validate() const {
  rig.validate();
  if (pattern.width() <= 0 || pattern.height() <= 0) {
    throw ConfigError("render: pattern must be nonempty");
  }
  if (noise_sigma < 0.0) throw ConfigError("render: noise_sigma must be >= 0");
  if (gamma <= 0.0) throw ConfigError("render: gamma must be positive");
}

namespace {

constexpr double kRayEpsilon = 1e-6;

std::optional<double> intersect_plane(const Primitive& p, const Eigen::Vector3d& o,
                                      const Eigen::Vector3d& d) {
  const double denom = p.extent.dot(d);
  if (std::abs(denom) < 1e-12) return std::nullopt;
  const double t = p.extent.dot(p.point - o) / denom;
  if (t <= kRayEpsilon) return std::nullopt;
  if (p.half_u > 0.0 && p.half_v > 0.0) {
    // Tangent frame: u axis chosen orthogonal to the normal and to world-y
    // when possible, v completes the basis.
    Eigen::Vector3d up = std::abs(p.extent.y()) > 0.99 ? Eigen::Vector3d(1, 0, 0)
                                                       : Eigen::Vector3d(0, 1, 0);
    const Eigen::Vector3d tu = up.cross(p.extent).normalized();
    const Eigen::Vector3d tv = p.extent.cross(tu);
    const Eigen::Vector3d rel = o + t * d - p.point;
    if (std::abs(rel.dot(tu)) > p.half_u || std::abs(rel.dot(tv)) > p.half_v) {
      return std::nullopt;
    }
  }
  return t;
}

std::optional<double> intersect_sphere(const Primitive& p, const Eigen::Vector3d& o,
                                       const Eigen::Vector3d& d) {
  const double r = p.extent.x();
  const Eigen::Vector3d oc = o - p.point;
  const double b = oc.dot(d);
  const double c = oc.squaredNorm() - r * r;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  double t = -b - sq;
  if (t <= kRayEpsilon) t = -b + sq;
  if (t <= kRayEpsilon) return std::nullopt;
  return t;
}

std::optional<double> intersect_box(const Primitive& p, const Eigen::Vector3d& o,
                                    const Eigen::Vector3d& d) {
  double t0 = kRayEpsilon;
  double t1 = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    if (std::abs(d[axis]) < 1e-15) {
      if (o[axis] < p.point[axis] || o[axis] > p.extent[axis]) return std::nullopt;
      continue;
    }
    double lo = (p.point[axis] - o[axis]) / d[axis];
    double hi = (p.extent[axis] - o[axis]) / d[axis];
    if (lo > hi) std::swap(lo, hi);
    t0 = std::max(t0, lo);
    t1 = std::min(t1, hi);
    if (t0 > t1) return std::nullopt;
  }
  return t0;
}

Eigen::Vector3d primitive_normal(const Primitive& p, const Eigen::Vector3d& at) {
  switch (p.kind) {
    case PrimitiveKind::kPlane: return p.extent;
    case PrimitiveKind::kSphere: return (at - p.point).normalized();
    case PrimitiveKind::kBox: {
      // Face whose plane is closest to the hit point.
      Eigen::Vector3d n = Eigen::Vector3d::Zero();
      double best = std::numeric_limits<double>::infinity();
      for (int axis = 0; axis < 3; ++axis) {
        const double d_min = std::abs(at[axis] - p.point[axis]);
        const double d_max = std::abs(at[axis] - p.extent[axis]);
        if (d_min < best) {
          best = d_min;
          n = Eigen::Vector3d::Zero();
          n[axis] = -1.0;
        }
        if (d_max < best) {
          best = d_max;
          n = Eigen::Vector3d::Zero();
          n[axis] = 1.0;
        }
      }
      return n;
    }
  }
  return {0, 0, -1};
}

// Bilinear sample with zero padding outside [0, w-1] x [0, h-1]; integer
// pixel centers sit at integer coordinates.
double sample_pattern(const PatternImage& pat, double x, double y) {
  if (x <= -1.0 || y <= -1.0 || x >= pat.width() || y >= pat.height()) return 0.0;
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0;
  const double fy = y - y0;
  auto tap = [&](int xi, int yi) -> double {
    if (xi < 0 || yi < 0 || xi >= pat.width() || yi >= pat.height()) return 0.0;
    return pat.intensities(xi, yi);
  };
  return (1.0 - fx) * (1.0 - fy) * tap(x0, y0) + fx * (1.0 - fy) * tap(x0 + 1, y0) +
         (1.0 - fx) * fy * tap(x0, y0 + 1) + fx * fy * tap(x0 + 1, y0 + 1);
}

Eigen::Vector3d camera_origin(const RigCalibration& rig, CameraView view) {
  return {view == CameraView::kLeft ? 0.0 : rig.baseline_lr, 0.0, 0.0};
}

const Intrinsics& camera_intrinsics(const RigCalibration& rig, CameraView view) {
  return view == CameraView::kLeft ? rig.cam_left : rig.cam_right;
}

}  // namespace

std::optional<Hit> raycast(const Scene& scene, const Eigen::Vector3d& origin,
                           const Eigen::Vector3d& direction) {
  std::optional<Hit> best;
  for (const auto& prim : scene.primitives) {
    std::optional<double> t;
    switch (prim.kind) {
      case PrimitiveKind::kPlane: t = intersect_plane(prim, origin, direction); break;
      case PrimitiveKind::kSphere: t = intersect_sphere(prim, origin, direction); break;
      case PrimitiveKind::kBox: t = intersect_box(prim, origin, direction); break;
    }
    if (!t) continue;
    if (!best || *t < best->t) {
      Hit hit;
      hit.t = *t;
      hit.point = origin + *t * direction;
      hit.normal = primitive_normal(prim, hit.point);
      if (hit.normal.dot(direction) > 0.0) hit.normal = -hit.normal;
      hit.material = prim.material;
      best = hit;
    }
  }
  return best;
}

Raster<double> render_ir(const Scene& scene, const RenderConfig& config, CameraView view) {
  scene.validate();
  config.validate();
  const Intrinsics& cam = camera_intrinsics(config.rig, view);
  const Eigen::Vector3d cam_pos = camera_origin(config.rig, view);
  const Eigen::Vector3d proj_pos{config.rig.baseline_lp, 0.0, 0.0};
  const Intrinsics& proj = config.rig.projector;

  Raster<double> image(cam.width, cam.height, 0.0);
  const Rng noise =
      Rng(config.seed).derive(view == CameraView::kLeft ? 0x1eafu : 0x2ea1u);

#pragma omp parallel for schedule(static)
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      const Eigen::Vector3d dir =
          Eigen::Vector3d((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0).normalized();
      double value = 0.0;
      if (auto hit = raycast(scene, cam_pos, dir)) {
        const Eigen::Vector3d& p = hit->point;
        double projector_term = 0.0;
        if (p.z() > 0.0) {
          const double up = proj.fx * (p.x() - config.rig.baseline_lp) / p.z() + proj.cx;
          const double vp = proj.fy * p.y() / p.z() + proj.cy;
          double pattern = sample_pattern(config.pattern, up, vp);
          if (pattern > 0.0) {
            const Eigen::Vector3d to_proj = proj_pos - p;
            const double dist = to_proj.norm();
            const Eigen::Vector3d l = to_proj / dist;
            // Shadow ray: any occluder strictly between surface and projector.
            if (auto blocker = raycast(scene, p + 1e-6 * hit->normal, l);
                blocker && blocker->t < dist - 1e-6) {
              pattern = 0.0;
            }
            if (pattern > 0.0) {
              const double diffuse = hit->material.albedo * std::max(0.0, hit->normal.dot(l));
              const Eigen::Vector3d view_dir = (cam_pos - p).normalized();
              const Eigen::Vector3d refl = 2.0 * hit->normal.dot(l) * hit->normal - l;
              const double spec =
                  hit->material.specular_strength *
                  std::pow(std::max(0.0, refl.dot(view_dir)), hit->material.shininess);
              projector_term =
                  scene.projector_power * pattern * (diffuse + spec) / (dist * dist);
            }
          }
        }
        value = projector_term + scene.ambient_level * hit->material.albedo;
        if (config.gamma != 1.0) value = std::pow(std::max(value, 0.0), config.gamma);
      }
      if (config.noise_sigma > 0.0) {
        const std::uint64_t idx = static_cast<std::uint64_t>(v) * cam.width + u;
        value += config.noise_sigma * noise.normal_at(idx);
      }
      image(u, v) = std::clamp(value, 0.0, 1.0);
    }
  }
  return image;
}

DepthMap render_ground_truth(const Scene& scene, const RigCalibration& rig, CameraView view) {
  scene.validate();
  rig.validate();
  const Intrinsics& cam = camera_intrinsics(rig, view);
  const Eigen::Vector3d cam_pos = camera_origin(rig, view);
  DepthMap depth(cam.width, cam.height);

#pragma omp parallel for schedule(static)
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      const Eigen::Vector3d dir =
          Eigen::Vector3d((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0).normalized();
      if (auto hit = raycast(scene, cam_pos, dir)) {
        depth.values(u, v) = hit->t * dir.z();
        depth.mask.set(u, v, true);
      }
    }
  }
  return depth;
}

Sample render_sample(const Scene& scene, const RenderConfig& config) {
  config.validate();
  Sample sample;
  sample.depth_gt = render_ground_truth(scene, config.rig, CameraView::kLeft);
  if (sample.depth_gt.mask.count() == 0) {
    throw RuntimeFailure("render_sample: nothing visible from the left camera");
  }
  sample.ir_left = render_ir(scene, config, CameraView::kLeft);
  sample.ir_right = render_ir(scene, config, CameraView::kRight);
  sample.pattern_ref = config.pattern;
  sample.disp_gt_lp =
      depth_to_disparity(sample.depth_gt, config.rig.cam_left.fx, config.rig.baseline_lp);
  sample.disp_gt_lr =
      depth_to_disparity(sample.depth_gt, config.rig.cam_left.fx, config.rig.baseline_lr);
  sample.rig = config.rig;
  sample.seed = config.seed;
  return sample;
}

}  // namespace nsl
