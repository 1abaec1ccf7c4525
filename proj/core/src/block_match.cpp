#include "nsl/block_match.hpp"

#include <cmath>
#include <limits>

#include "nsl/error.hpp"

namespace nsl {

void BlockMatchConfig::validate(int image_width) const {
  if (window < 3 || window % 2 == 0) throw ConfigError("block_match: window must be odd and >= 3");
  if (max_disp < 1) throw ConfigError("block_match: max_disp must be >= 1");
  if (max_disp >= image_width) throw ConfigError("block_match: max_disp must be < image width");
  if (min_texture < 0.0) throw ConfigError("block_match: min_texture must be >= 0");
}

std::optional<double> zncc(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ConfigError("zncc: length mismatch");
  if (a.size() < 2) throw ConfigError("zncc: vectors must have length >= 2");
  const double n = static_cast<double>(a.size());
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
    saa += a[i] * a[i];
    sbb += b[i] * b[i];
    sab += a[i] * b[i];
  }
  const double var_a = saa - sa * sa / n;
  const double var_b = sbb - sb * sb / n;
  constexpr double kVarFloor = 1e-12;
  if (var_a <= kVarFloor || var_b <= kVarFloor) return std::nullopt;
  const double r = (sab - sa * sb / n) / std::sqrt(var_a * var_b);
  return std::clamp(r, -1.0, 1.0);
}

namespace {

// (W+1) x (H+1) summed-area table.
class Integral {
 public:
  explicit Integral(const Raster<double>& img)
      : w_(img.width() + 1), sums_(static_cast<std::size_t>(w_) * (img.height() + 1), 0.0) {
    for (int y = 0; y < img.height(); ++y) {
      const double* row = img.row(y);
      double running = 0.0;
      for (int x = 0; x < img.width(); ++x) {
        running += row[x];
        sums_[idx(x + 1, y + 1)] = running + sums_[idx(x + 1, y)];
      }
    }
  }

  // Inclusive window [x0,x1] x [y0,y1].
  double window(int x0, int y0, int x1, int y1) const {
    return sums_[idx(x1 + 1, y1 + 1)] - sums_[idx(x0, y1 + 1)] - sums_[idx(x1 + 1, y0)] +
           sums_[idx(x0, y0)];
  }

 private:
  std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * w_ + x; }
  int w_;
  std::vector<double> sums_;
};

Raster<double> squared(const Raster<double>& img) {
  Raster<double> out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) out.values()[i] = img.values()[i] * img.values()[i];
  return out;
}

constexpr double kScoreInvalid = -std::numeric_limits<double>::infinity();

// Matching scores for every pixel and candidate disparity; higher is better
// (SAD is negated). `flip` reverses the search direction so the same routine
// serves the right-to-left pass of the consistency check.
// score layout: [d][y*W + x].
std::vector<std::vector<double>> score_volume(const Raster<double>& src,
                                              const Raster<double>& ref,
                                              const BlockMatchConfig& cfg, bool flip) {
  const int w = src.width();
  const int h = src.height();
  const int hw = cfg.window / 2;
  const double n = static_cast<double>(cfg.window) * cfg.window;

  const Integral src_sum(src);
  const Integral src_sq(squared(src));
  const Integral ref_sum(ref);
  const Integral ref_sq(squared(ref));

  std::vector<std::vector<double>> scores(cfg.max_disp + 1);
  for (int d = 0; d <= cfg.max_disp; ++d) {
    scores[d].assign(static_cast<std::size_t>(w) * h, kScoreInvalid);
    const int shift = flip ? d : -d;  // ref column = x + shift

    if (cfg.metric == MatchMetric::kZncc) {
      // Product image restricted to columns where both windows fit.
      Raster<double> prod(w, h, 0.0);
      for (int y = 0; y < h; ++y) {
        const double* sr = src.row(y);
        const double* rr = ref.row(y);
        for (int x = 0; x < w; ++x) {
          const int rx = x + shift;
          if (rx >= 0 && rx < w) prod(x, y) = sr[x] * rr[rx];
        }
      }
      const Integral prod_sum(prod);
      for (int y = hw; y < h - hw; ++y) {
        for (int x = hw; x < w - hw; ++x) {
          const int rx = x + shift;
          if (rx - hw < 0 || rx + hw >= w) continue;
          const double s_src = src_sum.window(x - hw, y - hw, x + hw, y + hw);
          const double s_src2 = src_sq.window(x - hw, y - hw, x + hw, y + hw);
          const double s_ref = ref_sum.window(rx - hw, y - hw, rx + hw, y + hw);
          const double s_ref2 = ref_sq.window(rx - hw, y - hw, rx + hw, y + hw);
          const double s_prod = prod_sum.window(x - hw, y - hw, x + hw, y + hw);
          const double var_src = s_src2 - s_src * s_src / n;
          const double var_ref = s_ref2 - s_ref * s_ref / n;
          if (var_src / n < cfg.min_texture || var_ref <= 1e-12) continue;
          const double cov = s_prod - s_src * s_ref / n;
          scores[d][static_cast<std::size_t>(y) * w + x] =
              std::clamp(cov / std::sqrt(var_src * var_ref), -1.0, 1.0);
        }
      }
    } else {
      Raster<double> adiff(w, h, 0.0);
      for (int y = 0; y < h; ++y) {
        const double* sr = src.row(y);
        const double* rr = ref.row(y);
        for (int x = 0; x < w; ++x) {
          const int rx = x + shift;
          if (rx >= 0 && rx < w) adiff(x, y) = std::abs(sr[x] - rr[rx]);
        }
      }
      const Integral adiff_sum(adiff);
      for (int y = hw; y < h - hw; ++y) {
        for (int x = hw; x < w - hw; ++x) {
          const int rx = x + shift;
          if (rx - hw < 0 || rx + hw >= w) continue;
          const double s_src = src_sum.window(x - hw, y - hw, x + hw, y + hw);
          const double s_src2 = src_sq.window(x - hw, y - hw, x + hw, y + hw);
          if ((s_src2 - s_src * s_src / n) / n < cfg.min_texture) continue;
          scores[d][static_cast<std::size_t>(y) * w + x] =
              -adiff_sum.window(x - hw, y - hw, x + hw, y + hw);
        }
      }
    }
  }
  return scores;
}

DisparityMap decode_scores(const std::vector<std::vector<double>>& scores, int w, int h,
                           int max_disp) {
  DisparityMap out(w, h);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      int best_d = -1;
      double best = kScoreInvalid;
      for (int d = 0; d <= max_disp; ++d) {
        if (scores[d][i] > best) {  // strict: ties go to the smaller disparity
          best = scores[d][i];
          best_d = d;
        }
      }
      if (best_d < 0) continue;
      double refined = best_d;
      if (best_d > 0 && best_d < max_disp && scores[best_d - 1][i] != kScoreInvalid &&
          scores[best_d + 1][i] != kScoreInvalid) {
        const double sm = scores[best_d - 1][i];
        const double s0 = best;
        const double sp = scores[best_d + 1][i];
        const double denom = sm - 2.0 * s0 + sp;
        if (denom < -1e-12) {
          refined += std::clamp(0.5 * (sm - sp) / denom, -0.5, 0.5);
        }
      }
      out.values(x, y) = refined;
      out.mask.set(x, y, true);
    }
  }
  return out;
}

}  // namespace

DisparityMap block_match(const Raster<double>& left, const Raster<double>& reference,
                         const BlockMatchConfig& cfg) {
  if (left.height() != reference.height() || left.width() != reference.width()) {
    throw ConfigError("block_match: rasters must share dimensions");
  }
  cfg.validate(left.width());

  auto scores = score_volume(left, reference, cfg, /*flip=*/false);
  DisparityMap disp = decode_scores(scores, left.width(), left.height(), cfg.max_disp);

  if (cfg.lrc_tol >= 0.0) {
    auto rev_scores = score_volume(reference, left, cfg, /*flip=*/true);
    const DisparityMap disp_rev =
        decode_scores(rev_scores, left.width(), left.height(), cfg.max_disp);
    const ValidityMask consistent = left_right_consistency(disp, disp_rev, cfg.lrc_tol);
    disp.mask = disp.mask & consistent;
  }
  return disp;
}

ValidityMask left_right_consistency(const DisparityMap& d_left, const DisparityMap& d_right,
                                    double tol) {
  if (!d_left.values.same_shape(d_right.values)) {
    throw ConfigError("left_right_consistency: shape mismatch");
  }
  const int w = d_left.values.width();
  const int h = d_left.values.height();
  ValidityMask mask(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!d_left.mask.at(x, y)) continue;
      const double dl = d_left.values(x, y);
      const int xr = x - static_cast<int>(std::lround(dl));
      if (xr < 0 || xr >= w || !d_right.mask.at(xr, y)) continue;
      if (std::abs(dl - d_right.values(xr, y)) <= tol) mask.set(x, y, true);
    }
  }
  return mask;
}

ValidityMask remove_depth_outliers(const DepthMap& z, double grad_thresh) {
  const int w = z.values.width();
  const int h = z.values.height();
  ValidityMask mask(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!z.mask.at(x, y)) continue;
      const double center = z.values(x, y);
      double max_grad = 0.0;
      const int nx[4] = {x - 1, x + 1, x, x};
      const int ny[4] = {y, y, y - 1, y + 1};
      for (int k = 0; k < 4; ++k) {
        if (!z.values.in_bounds(nx[k], ny[k]) || !z.mask.at(nx[k], ny[k])) continue;
        max_grad = std::max(max_grad, std::abs(center - z.values(nx[k], ny[k])));
      }
      mask.set(x, y, max_grad <= grad_thresh);
    }
  }
  return mask;
}

void TemporalStack::validate() const {
  if (captures.size() < 2) throw ConfigError("temporal stack: needs K >= 2 captures");
  if (captures.size() != references.size()) {
    throw ConfigError("temporal stack: capture/reference count mismatch");
  }
  for (const auto& img : captures) {
    if (!img.same_shape(captures.front())) throw ConfigError("temporal stack: shape mismatch");
  }
  for (const auto& img : references) {
    if (!img.same_shape(captures.front())) throw ConfigError("temporal stack: shape mismatch");
  }
}

DisparityMap temporal_zncc_decode(const TemporalStack& stack, int max_disp) {
  stack.validate();
  const int w = stack.captures.front().width();
  const int h = stack.captures.front().height();
  if (max_disp < 1 || max_disp >= w) throw ConfigError("temporal decode: bad max_disp");
  const int k = static_cast<int>(stack.captures.size());

  DisparityMap out(w, h);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    std::vector<double> code(k), cand(k), scores(max_disp + 1);
    for (int x = 0; x < w; ++x) {
      for (int i = 0; i < k; ++i) code[i] = stack.captures[i](x, y);

      int best_d = -1;
      double best = kScoreInvalid;
      for (int d = 0; d <= max_disp; ++d) {
        scores[d] = kScoreInvalid;
        const int rx = x - d;
        if (rx < 0) continue;
        for (int i = 0; i < k; ++i) cand[i] = stack.references[i](rx, y);
        if (auto r = zncc(code, cand)) {
          scores[d] = *r;
          if (*r > best) {
            best = *r;
            best_d = d;
          }
        }
      }
      if (best_d < 0) continue;
      double refined = best_d;
      if (best_d > 0 && best_d < max_disp && scores[best_d - 1] != kScoreInvalid &&
          scores[best_d + 1] != kScoreInvalid) {
        const double denom = scores[best_d - 1] - 2.0 * scores[best_d] + scores[best_d + 1];
        if (denom < -1e-12) {
          refined += std::clamp(0.5 * (scores[best_d - 1] - scores[best_d + 1]) / denom, -0.5, 0.5);
        }
      }
      out.values(x, y) = refined;
      out.mask.set(x, y, true);
    }
  }
  return out;
}

}  // namespace nsl
