#pragma once

#include <optional>
#include <vector>

#include "nsl/geometry.hpp"
#include "nsl/raster.hpp"

namespace nsl {

enum class MatchMetric { kZncc, kSad };

struct BlockMatchConfig {
  int window = 9;           // odd, >= 3
  int max_disp = 64;        // inclusive upper bound on candidate disparity
  MatchMetric metric = MatchMetric::kZncc;
  double lrc_tol = -1.0;    // left-right consistency tolerance in px; < 0 disables
  double min_texture = 1e-6;  // window variance floor

  void validate(int image_width) const;
};

// Zero-normalized cross-correlation in [-1,1]; nullopt when either vector has
// (numerically) zero variance. Throws on length mismatch or length < 2.
std::optional<double> zncc(std::span<const double> a, std::span<const double> b);

// Winner-take-all matching of `left` against `reference` along the same row,
// candidates d in [0, max_disp] (left pixel x matches reference column x-d),
// 3-point parabolic subpixel refinement, ties toward the smaller disparity.
// Pixels failing min_texture or left-right consistency (when enabled) are
// invalid.
DisparityMap block_match(const Raster<double>& left, const Raster<double>& reference,
                         const BlockMatchConfig& cfg);

// Pixel valid iff |dL(x,y) - dR(x - round(dL), y)| <= tol with the lookup in
// bounds and valid on both sides.
ValidityMask left_right_consistency(const DisparityMap& d_left, const DisparityMap& d_right,
                                    double tol);

// Invalidates pixels whose largest 4-neighbor depth difference exceeds
// grad_thresh (meters per pixel). Already-invalid pixels stay invalid.
ValidityMask remove_depth_outliers(const DepthMap& z, double grad_thresh);

// K registered captures of one scene plus the K reference patterns that
// produced them.
struct TemporalStack {
  std::vector<Raster<double>> captures;
  std::vector<Raster<double>> references;

  void validate() const;
};

// Per-pixel temporal code matching: ZNCC between the captured K-vector and
// the reference K-vector at each candidate column, argmax over d in
// [0, max_disp] plus parabolic subpixel. Zero-variance codes are invalid.
DisparityMap temporal_zncc_decode(const TemporalStack& stack, int max_disp);

}  // namespace nsl
