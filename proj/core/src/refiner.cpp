#include "nsl/refiner_impl.hpp"

#include <cmath>

namespace nsl {

void RefinerConfig::validate() const {
  if (backbone_width < 2) throw ConfigError("refiner: backbone_width too small");
  if (alpha < 0.0) throw ConfigError("refiner: alpha must be >= 0");
  if (prompt_convs != 3) throw ConfigError("refiner: prompt path is fixed at 3 convolutions");
  if (prompt_scale <= 0.0) throw ConfigError("refiner: prompt_scale must be positive");
}

template class Refiner<float>;
template class Refiner<double>;
template nn::Tensor<float> stage2_loss_graph(const nn::Tensor<float>&, const DepthMap&, double);
template nn::Tensor<double> stage2_loss_graph(const nn::Tensor<double>&, const DepthMap&, double);

Raster<double> fill_invalid_nearest(const DepthMap& depth) {
  const int w = depth.values.width();
  const int h = depth.values.height();
  Raster<double> filled = depth.values;
  // Distance to the valid pixel currently providing each value; axis-wise
  // sweeps in all four directions approximate the nearest valid neighbor.
  Raster<int> dist(w, h, std::numeric_limits<int>::max() / 2);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (depth.mask.at(x, y)) {
        dist(x, y) = 0;
      } else {
        filled(x, y) = 0.0;
      }
    }
  }
  auto relax = [&](int x, int y, int from_x, int from_y) {
    if (!filled.in_bounds(from_x, from_y)) return;
    const int cand = dist(from_x, from_y) + 1;
    if (cand < dist(x, y)) {
      dist(x, y) = cand;
      filled(x, y) = filled(from_x, from_y);
    }
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) relax(x, y, x - 1, y);
    for (int x = w - 1; x >= 0; --x) relax(x, y, x + 1, y);
  }
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) relax(x, y, x, y - 1);
    for (int y = h - 1; y >= 0; --y) relax(x, y, x, y + 1);
  }
  return filled;
}

nn::Tensor<float> make_prompt_tensor(const DepthMap& d_init, double prompt_scale) {
  const int w = d_init.values.width();
  const int h = d_init.values.height();
  const Raster<double> filled = fill_invalid_nearest(d_init);
  nn::Tensor<float> prompt = nn::Tensor<float>::leaf({2, h, w});
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      prompt.value()[i] = static_cast<float>(filled(x, y) / prompt_scale);
      prompt.value()[hw + i] = d_init.mask.at(x, y) ? 1.0f : 0.0f;
    }
  }
  return prompt;
}

DepthMap refine(const Raster<double>& ir_left, const DepthMap& d_init,
                nn::ParamStore<float>& ps, const Refiner<float>& refiner) {
  if (!ir_left.same_shape(d_init.values)) throw ConfigError("refine: shape mismatch");
  nn::Tensor<float> ir = nn::Tensor<float>::leaf({1, ir_left.height(), ir_left.width()});
  for (int y = 0; y < ir_left.height(); ++y) {
    for (int x = 0; x < ir_left.width(); ++x) {
      ir.value()[static_cast<std::size_t>(y) * ir_left.width() + x] =
          static_cast<float>(ir_left(x, y));
    }
  }
  nn::Tensor<float> prompt = make_prompt_tensor(d_init, refiner.config().prompt_scale);
  nn::Tensor<float> out = refiner.forward(ps, ir, prompt);

  DepthMap result(ir_left.width(), ir_left.height());
  for (int y = 0; y < ir_left.height(); ++y) {
    for (int x = 0; x < ir_left.width(); ++x) {
      result.values(x, y) = out.value()[static_cast<std::size_t>(y) * ir_left.width() + x];
      result.mask.set(x, y, true);
    }
  }
  return result;
}

double stage2_loss(const DepthMap& depth, const DepthMap& depth_gt, double alpha) {
  if (!depth.values.same_shape(depth_gt.values)) throw ConfigError("stage2_loss: shape mismatch");
  if (alpha < 0.0) throw ConfigError("stage2_loss: alpha must be >= 0");
  const int w = depth.values.width();
  const int h = depth.values.height();

  double l1 = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!depth.mask.at(x, y) || !depth_gt.mask.at(x, y)) continue;
      l1 += std::abs(depth.values(x, y) - depth_gt.values(x, y));
      ++n;
    }
  }
  if (n == 0) throw ConfigError("stage2_loss: empty joint mask");
  double loss = l1 / static_cast<double>(n);

  auto pair_valid = [&](int x0, int y0, int x1, int y1) {
    return depth.mask.at(x0, y0) && depth.mask.at(x1, y1) && depth_gt.mask.at(x0, y0) &&
           depth_gt.mask.at(x1, y1);
  };
  double gx = 0.0, gy = 0.0;
  std::size_t nx = 0, ny = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x + 1 < w; ++x) {
      if (!pair_valid(x, y, x + 1, y)) continue;
      const double dp = depth.values(x + 1, y) - depth.values(x, y);
      const double dg = depth_gt.values(x + 1, y) - depth_gt.values(x, y);
      gx += std::abs(dp - dg);
      ++nx;
    }
  }
  for (int y = 0; y + 1 < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!pair_valid(x, y, x, y + 1)) continue;
      const double dp = depth.values(x, y + 1) - depth.values(x, y);
      const double dg = depth_gt.values(x, y + 1) - depth_gt.values(x, y);
      gy += std::abs(dp - dg);
      ++ny;
    }
  }
  if (nx > 0) loss += alpha * gx / static_cast<double>(nx);
  if (ny > 0) loss += alpha * gy / static_cast<double>(ny);
  return loss;
}

}  // namespace nsl
