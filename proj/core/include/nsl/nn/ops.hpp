#pragma once

#include <Eigen/Core>

#include "nsl/nn/tensor.hpp"

namespace nsl::nn {

template <typename T>
using MatrixRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixCM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;

template <typename T>
inline void check_finite(const Tensor<T>& t, const char* what) {
  if (!t.all_finite()) throw NonFiniteError(std::string(what) + ": non-finite values");
}

template <typename T>
Tensor<T> scalar_tensor(T v) {
  return Tensor<T>::from_values({1}, {v});
}

namespace detail {

template <typename T>
void im2col(const std::vector<T>& x, int ci, int h, int w, int kh, int kw, int stride, int pad,
            int oh, int ow, std::vector<T>& col) {
  const std::size_t patch = static_cast<std::size_t>(ci) * kh * kw;
  const std::size_t cols = static_cast<std::size_t>(oh) * ow;
  col.assign(patch * cols, T{0});
  // Column-major (K x P): entry (k, p) at col[p*patch + k].
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      T* dst = col.data() + (static_cast<std::size_t>(oy) * ow + ox) * patch;
      for (int c = 0; c < ci; ++c) {
        const T* src_chan = x.data() + static_cast<std::size_t>(c) * h * w;
        for (int ky = 0; ky < kh; ++ky) {
          const int iy = oy * stride + ky - pad;
          for (int kx = 0; kx < kw; ++kx) {
            const int ix = ox * stride + kx - pad;
            if (iy >= 0 && iy < h && ix >= 0 && ix < w) {
              *dst = src_chan[static_cast<std::size_t>(iy) * w + ix];
            }
            ++dst;
          }
        }
      }
    }
  }
}

}  // namespace detail

// x: (Ci,H,W), weight: (Co,Ci,Kh,Kw), bias: (Co). Zero padding.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, int stride,
                 int pad) {
  if (x.shape().size() != 3 || weight.shape().size() != 4) {
    throw ConfigError("conv2d: expects (C,H,W) input and (Co,Ci,Kh,Kw) weight");
  }
  const int ci = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int co = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  if (weight.dim(1) != ci) throw ConfigError("conv2d: channel mismatch");
  if (bias.numel() != static_cast<std::size_t>(co)) throw ConfigError("conv2d: bias mismatch");
  const int oh = (h + 2 * pad - kh) / stride + 1;
  const int ow = (w + 2 * pad - kw) / stride + 1;
  if (oh <= 0 || ow <= 0) throw ConfigError("conv2d: output would be empty");

  auto xn = x.node();
  auto wn = weight.node();
  auto bn = bias.node();
  const int patch = ci * kh * kw;
  const std::size_t pixels = static_cast<std::size_t>(oh) * ow;

  Tensor<T> out = Tensor<T>::op(
      {co, oh, ow}, {xn, wn, bn},
      [=](Node<T>& n) {
        Eigen::Map<const MatrixRM<T>> g(n.grad.data(), co, pixels);
        if (bn->requires_grad || bn->backward_fn) {
          bn->ensure_grad();
          for (int c = 0; c < co; ++c) bn->grad[c] += g.row(c).sum();
        }
        const bool need_w = wn->requires_grad || wn->backward_fn;
        const bool need_x = xn->requires_grad || xn->backward_fn;
        if (!need_w && !need_x) return;

        std::vector<T> col;
        detail::im2col(xn->value, ci, h, w, kh, kw, stride, pad, oh, ow, col);
        Eigen::Map<const MatrixCM<T>> col_m(col.data(), patch, pixels);
        if (need_w) {
          wn->ensure_grad();
          Eigen::Map<MatrixRM<T>> gw(wn->grad.data(), co, patch);
          gw.noalias() += g * col_m.transpose();
        }
        if (need_x) {
          xn->ensure_grad();
          Eigen::Map<const MatrixRM<T>> w_m(wn->value.data(), co, patch);
          MatrixCM<T> gcol(patch, pixels);
          gcol.noalias() = w_m.transpose() * g;
          // col2im scatter.
          for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
              const T* src = gcol.data() + (static_cast<std::size_t>(oy) * ow + ox) * patch;
              for (int c = 0; c < ci; ++c) {
                T* dst_chan = xn->grad.data() + static_cast<std::size_t>(c) * h * w;
                for (int ky = 0; ky < kh; ++ky) {
                  const int iy = oy * stride + ky - pad;
                  for (int kx = 0; kx < kw; ++kx) {
                    const int ix = ox * stride + kx - pad;
                    if (iy >= 0 && iy < h && ix >= 0 && ix < w) {
                      dst_chan[static_cast<std::size_t>(iy) * w + ix] = static_cast<T>(
                          dst_chan[static_cast<std::size_t>(iy) * w + ix] + *src);
                    }
                    ++src;
                  }
                }
              }
            }
          }
        }
      });

  std::vector<T> col;
  detail::im2col(x.value(), ci, h, w, kh, kw, stride, pad, oh, ow, col);
  Eigen::Map<const MatrixCM<T>> col_m(col.data(), patch, pixels);
  Eigen::Map<const MatrixRM<T>> w_m(weight.value().data(), co, patch);
  Eigen::Map<MatrixRM<T>> out_m(out.value().data(), co, pixels);
  out_m.noalias() = w_m * col_m;
  for (int c = 0; c < co; ++c) out_m.row(c).array() += bias.value()[c];
  return out;
}

// Per-channel normalization over the spatial extent of one sample.
template <typename T>
Tensor<T> instance_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                        T eps = static_cast<T>(1e-5)) {
  const int c = x.dim(0);
  const std::size_t hw = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  if (gamma.numel() != static_cast<std::size_t>(c) || beta.numel() != static_cast<std::size_t>(c)) {
    throw ConfigError("instance_norm: affine parameter mismatch");
  }
  auto xn = x.node();
  auto gn = gamma.node();
  auto bn = beta.node();

  auto stats = std::make_shared<std::vector<T>>(2 * c);  // per channel: mean, inv std
  Tensor<T> out = Tensor<T>::op(
      x.shape(), {xn, gn, bn},
      [=](Node<T>& n) {
        const T inv_hw = T{1} / static_cast<T>(hw);
        for (int ch = 0; ch < c; ++ch) {
          const T mean = (*stats)[2 * ch];
          const T istd = (*stats)[2 * ch + 1];
          const T* xv = xn->value.data() + ch * hw;
          const T* g = n.grad.data() + ch * hw;
          T sum_g = 0, sum_gx = 0;
          for (std::size_t i = 0; i < hw; ++i) {
            const T xhat = (xv[i] - mean) * istd;
            sum_g += g[i];
            sum_gx += g[i] * xhat;
          }
          if (gn->requires_grad || gn->backward_fn) {
            gn->ensure_grad();
            gn->grad[ch] += sum_gx;
          }
          if (bn->requires_grad || bn->backward_fn) {
            bn->ensure_grad();
            bn->grad[ch] += sum_g;
          }
          if (xn->requires_grad || xn->backward_fn) {
            xn->ensure_grad();
            T* gx = xn->grad.data() + ch * hw;
            const T gamma_istd = gn->value[ch] * istd;
            const T mean_g = sum_g * inv_hw;
            const T mean_gx = sum_gx * inv_hw;
            for (std::size_t i = 0; i < hw; ++i) {
              const T xhat = (xv[i] - mean) * istd;
              gx[i] += gamma_istd * (g[i] - mean_g - xhat * mean_gx);
            }
          }
        }
      });

  for (int ch = 0; ch < c; ++ch) {
    const T* xv = x.value().data() + ch * hw;
    T mean = 0;
    for (std::size_t i = 0; i < hw; ++i) mean += xv[i];
    mean /= static_cast<T>(hw);
    T var = 0;
    for (std::size_t i = 0; i < hw; ++i) var += (xv[i] - mean) * (xv[i] - mean);
    var /= static_cast<T>(hw);
    const T istd = T{1} / std::sqrt(var + eps);
    (*stats)[2 * ch] = mean;
    (*stats)[2 * ch + 1] = istd;
    T* ov = out.value().data() + ch * hw;
    const T g = gamma.value()[ch];
    const T b = beta.value()[ch];
    for (std::size_t i = 0; i < hw; ++i) ov[i] = g * (xv[i] - mean) * istd + b;
  }
  return out;
}

// 2x2 average pooling, stride 2; ragged edges average over the cells present.
template <typename T>
Tensor<T> avg_pool2(const Tensor<T>& x) {
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int oh = (h + 1) / 2, ow = (w + 1) / 2;
  auto xn = x.node();
  Tensor<T> out = Tensor<T>::op({c, oh, ow}, {xn}, [=](Node<T>& n) {
    if (!xn->requires_grad && !xn->backward_fn) return;
    xn->ensure_grad();
    for (int ch = 0; ch < c; ++ch) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          const int y1 = std::min(2 * oy + 2, h), x1 = std::min(2 * ox + 2, w);
          const int count = (y1 - 2 * oy) * (x1 - 2 * ox);
          const T g = n.grad[(static_cast<std::size_t>(ch) * oh + oy) * ow + ox] /
                      static_cast<T>(count);
          for (int y = 2 * oy; y < y1; ++y) {
            for (int xx = 2 * ox; xx < x1; ++xx) {
              xn->grad[(static_cast<std::size_t>(ch) * h + y) * w + xx] += g;
            }
          }
        }
      }
    }
  });
  for (int ch = 0; ch < c; ++ch) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const int y1 = std::min(2 * oy + 2, h), x1 = std::min(2 * ox + 2, w);
        T sum = 0;
        for (int y = 2 * oy; y < y1; ++y) {
          for (int xx = 2 * ox; xx < x1; ++xx) {
            sum += x.value()[(static_cast<std::size_t>(ch) * h + y) * w + xx];
          }
        }
        out.value()[(static_cast<std::size_t>(ch) * oh + oy) * ow + ox] =
            sum / static_cast<T>((y1 - 2 * oy) * (x1 - 2 * ox));
      }
    }
  }
  return out;
}

// Bilinear upsampling by an integer factor, half-pixel-aligned sampling with
// clamp-to-edge.
template <typename T>
Tensor<T> upsample_bilinear(const Tensor<T>& x, int factor) {
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int oh = h * factor, ow = w * factor;

  // Per-output-axis taps are shared across channels and the other axis.
  struct Tap {
    int i0, i1;
    T f;
  };
  auto make_taps = [factor](int in, int len) {
    std::vector<Tap> taps(len);
    for (int o = 0; o < len; ++o) {
      const double src = (o + 0.5) / factor - 0.5;
      const double clamped = std::clamp(src, 0.0, static_cast<double>(in - 1));
      const int i0 = static_cast<int>(std::floor(clamped));
      taps[o] = {i0, std::min(i0 + 1, in - 1), static_cast<T>(clamped - i0)};
    }
    return taps;
  };
  auto ty = std::make_shared<std::vector<Tap>>(make_taps(h, oh));
  auto tx = std::make_shared<std::vector<Tap>>(make_taps(w, ow));

  auto xn = x.node();
  Tensor<T> out = Tensor<T>::op({c, oh, ow}, {xn}, [=](Node<T>& n) {
    if (!xn->requires_grad && !xn->backward_fn) return;
    xn->ensure_grad();
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t in_base = static_cast<std::size_t>(ch) * h * w;
      const std::size_t out_base = static_cast<std::size_t>(ch) * oh * ow;
      for (int oy = 0; oy < oh; ++oy) {
        const Tap& a = (*ty)[oy];
        for (int ox = 0; ox < ow; ++ox) {
          const Tap& b = (*tx)[ox];
          const T g = n.grad[out_base + static_cast<std::size_t>(oy) * ow + ox];
          xn->grad[in_base + static_cast<std::size_t>(a.i0) * w + b.i0] +=
              g * (T{1} - a.f) * (T{1} - b.f);
          xn->grad[in_base + static_cast<std::size_t>(a.i0) * w + b.i1] += g * (T{1} - a.f) * b.f;
          xn->grad[in_base + static_cast<std::size_t>(a.i1) * w + b.i0] += g * a.f * (T{1} - b.f);
          xn->grad[in_base + static_cast<std::size_t>(a.i1) * w + b.i1] += g * a.f * b.f;
        }
      }
    }
  });
  for (int ch = 0; ch < c; ++ch) {
    const std::size_t in_base = static_cast<std::size_t>(ch) * h * w;
    const std::size_t out_base = static_cast<std::size_t>(ch) * oh * ow;
    for (int oy = 0; oy < oh; ++oy) {
      const Tap& a = (*ty)[oy];
      for (int ox = 0; ox < ow; ++ox) {
        const Tap& b = (*tx)[ox];
        const T v00 = x.value()[in_base + static_cast<std::size_t>(a.i0) * w + b.i0];
        const T v01 = x.value()[in_base + static_cast<std::size_t>(a.i0) * w + b.i1];
        const T v10 = x.value()[in_base + static_cast<std::size_t>(a.i1) * w + b.i0];
        const T v11 = x.value()[in_base + static_cast<std::size_t>(a.i1) * w + b.i1];
        out.value()[out_base + static_cast<std::size_t>(oy) * ow + ox] =
            (T{1} - a.f) * ((T{1} - b.f) * v00 + b.f * v01) + a.f * ((T{1} - b.f) * v10 + b.f * v11);
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ConfigError("concat: empty input");
  const int h = parts[0].dim(1), w = parts[0].dim(2);
  int c_total = 0;
  std::vector<std::shared_ptr<Node<T>>> parents;
  for (const auto& p : parts) {
    if (p.dim(1) != h || p.dim(2) != w) throw ConfigError("concat: spatial mismatch");
    c_total += p.dim(0);
    parents.push_back(p.node());
  }
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  Tensor<T> out = Tensor<T>::op({c_total, h, w}, parents, [hw](Node<T>& n) {
    std::size_t offset = 0;
    for (auto& parent : n.parents) {
      const std::size_t len = parent->value.size();
      if (parent->requires_grad || parent->backward_fn) {
        parent->ensure_grad();
        for (std::size_t i = 0; i < len; ++i) parent->grad[i] += n.grad[offset + i];
      }
      offset += len;
    }
    (void)hw;
  });
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.value().begin(), p.value().end(), out.value().begin() + offset);
    offset += p.numel();
  }
  return out;
}

// Zero-pad on the right/bottom only, so pixel coordinates (and therefore
// disparities) are unchanged.
template <typename T>
Tensor<T> pad_right_bottom(const Tensor<T>& x, int pad_w, int pad_h) {
  if (pad_w == 0 && pad_h == 0) return x;
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int oh = h + pad_h, ow = w + pad_w;
  auto xn = x.node();
  Tensor<T> out = Tensor<T>::op({c, oh, ow}, {xn}, [=](Node<T>& n) {
    if (!xn->requires_grad && !xn->backward_fn) return;
    xn->ensure_grad();
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) {
          xn->grad[(static_cast<std::size_t>(ch) * h + y) * w + xx] +=
              n.grad[(static_cast<std::size_t>(ch) * oh + y) * ow + xx];
        }
      }
    }
  });
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        out.value()[(static_cast<std::size_t>(ch) * oh + y) * ow + xx] =
            x.value()[(static_cast<std::size_t>(ch) * h + y) * w + xx];
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> crop_to(const Tensor<T>& x, int target_h, int target_w) {
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (target_h == h && target_w == w) return x;
  if (target_h > h || target_w > w) throw ConfigError("crop_to: target exceeds input");
  auto xn = x.node();
  Tensor<T> out = Tensor<T>::op({c, target_h, target_w}, {xn}, [=](Node<T>& n) {
    if (!xn->requires_grad && !xn->backward_fn) return;
    xn->ensure_grad();
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < target_h; ++y) {
        for (int xx = 0; xx < target_w; ++xx) {
          xn->grad[(static_cast<std::size_t>(ch) * h + y) * w + xx] +=
              n.grad[(static_cast<std::size_t>(ch) * target_h + y) * target_w + xx];
        }
      }
    }
  });
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < target_h; ++y) {
      for (int xx = 0; xx < target_w; ++xx) {
        out.value()[(static_cast<std::size_t>(ch) * target_h + y) * target_w + xx] =
            x.value()[(static_cast<std::size_t>(ch) * h + y) * w + xx];
      }
    }
  }
  return out;
}

// Dot-product matching scores between every left pixel and every same-row
// candidate: C(i,j,k) = sum_h FL(h,i,j) * FR(h,i,k). Shapes (C,H,W) -> (H,W,W).
template <typename T>
Tensor<T> cost_volume(const Tensor<T>& fl, const Tensor<T>& fr) {
  check_same_shape(fl, fr, "cost_volume");
  const int c = fl.dim(0), h = fl.dim(1), w = fl.dim(2);
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  auto ln = fl.node();
  auto rn = fr.node();

  using StrideT = Eigen::OuterStride<>;
  auto feature_row = [hw, w](const std::vector<T>& buf, int c_, int row) {
    // (W x C) view of one image row across channels.
    return Eigen::Map<const MatrixCM<T>, 0, StrideT>(
        buf.data() + static_cast<std::size_t>(row) * w, w, c_, StrideT(static_cast<long>(hw)));
  };
  auto feature_row_mut = [hw, w](std::vector<T>& buf, int c_, int row) {
    return Eigen::Map<MatrixCM<T>, 0, StrideT>(buf.data() + static_cast<std::size_t>(row) * w, w,
                                               c_, StrideT(static_cast<long>(hw)));
  };

  Tensor<T> out = Tensor<T>::op({h, w, w}, {ln, rn}, [=](Node<T>& n) {
    const bool need_l = ln->requires_grad || ln->backward_fn;
    const bool need_r = rn->requires_grad || rn->backward_fn;
    if (!need_l && !need_r) return;
    if (need_l) ln->ensure_grad();
    if (need_r) rn->ensure_grad();
    for (int i = 0; i < h; ++i) {
      Eigen::Map<const MatrixRM<T>> g(n.grad.data() + static_cast<std::size_t>(i) * w * w, w, w);
      if (need_l) {
        auto gl = feature_row_mut(ln->grad, c, i);
        gl.noalias() += g * feature_row(rn->value, c, i);
      }
      if (need_r) {
        auto gr = feature_row_mut(rn->grad, c, i);
        gr.noalias() += g.transpose() * feature_row(ln->value, c, i);
      }
    }
  });
  for (int i = 0; i < h; ++i) {
    Eigen::Map<MatrixRM<T>> o(out.value().data() + static_cast<std::size_t>(i) * w * w, w, w);
    o.noalias() = feature_row(fl.value(), c, i) * feature_row(fr.value(), c, i).transpose();
  }
  return out;
}

// Averages non-overlapping pairs along the last dimension (a trailing odd
// entry is dropped).
template <typename T>
Tensor<T> avg_pool_last_dim(const Tensor<T>& vol) {
  const int h = vol.dim(0), w = vol.dim(1), k = vol.dim(2);
  if (k < 2) throw ConfigError("avg_pool_last_dim: last dimension too small");
  const int ok = k / 2;
  auto vn = vol.node();
  Tensor<T> out = Tensor<T>::op({h, w, ok}, {vn}, [=](Node<T>& n) {
    if (!vn->requires_grad && !vn->backward_fn) return;
    vn->ensure_grad();
    const std::size_t rows = static_cast<std::size_t>(h) * w;
    for (std::size_t r = 0; r < rows; ++r) {
      const T* g = n.grad.data() + r * ok;
      T* dst = vn->grad.data() + r * k;
      for (int m = 0; m < ok; ++m) {
        dst[2 * m] += g[m] / T{2};
        dst[2 * m + 1] += g[m] / T{2};
      }
    }
  });
  const std::size_t rows = static_cast<std::size_t>(h) * w;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* src = vol.value().data() + r * k;
    T* dst = out.value().data() + r * ok;
    for (int m = 0; m < ok; ++m) dst[m] = (src[2 * m] + src[2 * m + 1]) / T{2};
  }
  return out;
}

// Correlation feature sampling: for each pyramid level l the candidate index
// is (j - d) / 2^l, and 2r+1 linearly interpolated taps around it are
// gathered, zero outside the level's range. Output channels are level-major.
// Differentiable in both the pyramid entries and the disparity.
template <typename T>
Tensor<T> corr_lookup(const std::vector<Tensor<T>>& pyramid, const Tensor<T>& disp, int radius) {
  if (pyramid.empty()) throw ConfigError("corr_lookup: empty pyramid");
  const int h = pyramid[0].dim(0), w = pyramid[0].dim(1);
  if (disp.shape() != Shape{1, h, w}) throw ConfigError("corr_lookup: disparity shape mismatch");
  const int levels = static_cast<int>(pyramid.size());
  const int taps = 2 * radius + 1;

  std::vector<std::shared_ptr<Node<T>>> parents{disp.node()};
  for (const auto& level : pyramid) parents.push_back(level.node());
  auto dn = disp.node();

  auto level_dims = std::make_shared<std::vector<int>>();
  for (const auto& level : pyramid) level_dims->push_back(level.dim(2));

  Tensor<T> out = Tensor<T>::op(
      {levels * taps, h, w}, parents,
      [=](Node<T>& n) {
        const bool need_d = dn->requires_grad || dn->backward_fn;
        if (need_d) dn->ensure_grad();
        const std::size_t hw = static_cast<std::size_t>(h) * w;
        for (int l = 0; l < levels; ++l) {
          auto& vol = *n.parents[1 + l];
          const bool need_vol = vol.requires_grad || vol.backward_fn;
          if (need_vol) vol.ensure_grad();
          const int kl = (*level_dims)[l];
          const T inv_scale = T{1} / static_cast<T>(1 << l);
          for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
              const std::size_t px = static_cast<std::size_t>(i) * w + j;
              const T center = (static_cast<T>(j) - dn->value[px]) * inv_scale;
              const T* vrow = vol.value.data() + (static_cast<std::size_t>(i) * w + j) * kl;
              for (int t = 0; t < taps; ++t) {
                const T g = n.grad[(static_cast<std::size_t>(l * taps + t)) * hw + px];
                if (g == T{0}) continue;
                const T pos = center + static_cast<T>(t - radius);
                const T fl_pos = std::floor(pos);
                const int i0 = static_cast<int>(fl_pos);
                const T f = pos - fl_pos;
                const bool in0 = i0 >= 0 && i0 < kl;
                const bool in1 = i0 + 1 >= 0 && i0 + 1 < kl;
                if (need_vol) {
                  T* grow = vol.grad.data() + (static_cast<std::size_t>(i) * w + j) * kl;
                  if (in0) grow[i0] += g * (T{1} - f);
                  if (in1) grow[i0 + 1] += g * f;
                }
                if (need_d) {
                  const T v0 = in0 ? vrow[i0] : T{0};
                  const T v1 = in1 ? vrow[i0 + 1] : T{0};
                  // d(value)/d(pos) = v1 - v0, d(pos)/d(disp) = -inv_scale.
                  dn->grad[px] += g * (v1 - v0) * (-inv_scale);
                }
              }
            }
          }
        }
      });

  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int l = 0; l < levels; ++l) {
    const auto& vol = pyramid[l];
    const int kl = vol.dim(2);
    const T inv_scale = T{1} / static_cast<T>(1 << l);
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const std::size_t px = static_cast<std::size_t>(i) * w + j;
        const T center = (static_cast<T>(j) - disp.value()[px]) * inv_scale;
        const T* vrow = vol.value().data() + (static_cast<std::size_t>(i) * w + j) * kl;
        for (int t = 0; t < taps; ++t) {
          const T pos = center + static_cast<T>(t - radius);
          const T fl_pos = std::floor(pos);
          const int i0 = static_cast<int>(fl_pos);
          const T f = pos - fl_pos;
          const T v0 = (i0 >= 0 && i0 < kl) ? vrow[i0] : T{0};
          const T v1 = (i0 + 1 >= 0 && i0 + 1 < kl) ? vrow[i0 + 1] : T{0};
          out.value()[(static_cast<std::size_t>(l * taps + t)) * hw + px] =
              (T{1} - f) * v0 + f * v1;
        }
      }
    }
  }
  return out;
}

// Learned convex combination upsampling: each fine pixel in a factor x factor
// block is a softmax-weighted mean of the 3x3 coarse neighborhood (zero
// padded), and disparities are rescaled by the factor. logits layout:
// channel n*factor^2 + dy*factor + dx weights neighbor n for block cell
// (dy,dx).
template <typename T>
Tensor<T> convex_upsample(const Tensor<T>& disp, const Tensor<T>& logits, int factor) {
  const int h = disp.dim(1), w = disp.dim(2);
  const int f2 = factor * factor;
  if (disp.dim(0) != 1) throw ConfigError("convex_upsample: disparity must have one channel");
  if (logits.shape() != Shape{9 * f2, h, w}) {
    throw ConfigError("convex_upsample: logits shape mismatch");
  }
  auto dn = disp.node();
  auto ln = logits.node();
  const std::size_t hw = static_cast<std::size_t>(h) * w;

  auto softmax_at = [hw, f2](const std::vector<T>& lv, std::size_t px, int cell, T* y) {
    T m = -std::numeric_limits<T>::infinity();
    for (int nb = 0; nb < 9; ++nb) m = std::max(m, lv[(static_cast<std::size_t>(nb) * f2 + cell) * hw + px]);
    T sum = 0;
    for (int nb = 0; nb < 9; ++nb) {
      y[nb] = std::exp(lv[(static_cast<std::size_t>(nb) * f2 + cell) * hw + px] - m);
      sum += y[nb];
    }
    for (int nb = 0; nb < 9; ++nb) y[nb] /= sum;
  };

  Tensor<T> out = Tensor<T>::op(
      {1, h * factor, w * factor}, {dn, ln},
      [=](Node<T>& n) {
        const bool need_d = dn->requires_grad || dn->backward_fn;
        const bool need_l = ln->requires_grad || ln->backward_fn;
        if (need_d) dn->ensure_grad();
        if (need_l) ln->ensure_grad();
        const int ow = w * factor;
        T y[9], vals[9];
        for (int i = 0; i < h; ++i) {
          for (int j = 0; j < w; ++j) {
            const std::size_t px = static_cast<std::size_t>(i) * w + j;
            for (int nb = 0; nb < 9; ++nb) {
              const int ni = i + nb / 3 - 1;
              const int nj = j + nb % 3 - 1;
              vals[nb] = (ni >= 0 && ni < h && nj >= 0 && nj < w)
                             ? dn->value[static_cast<std::size_t>(ni) * w + nj]
                             : T{0};
            }
            for (int cell = 0; cell < f2; ++cell) {
              const int oy = i * factor + cell / factor;
              const int ox = j * factor + cell % factor;
              const T g = n.grad[static_cast<std::size_t>(oy) * ow + ox];
              if (g == T{0}) continue;
              softmax_at(ln->value, px, cell, y);
              T mean = 0;
              for (int nb = 0; nb < 9; ++nb) mean += y[nb] * vals[nb];
              const T gf = g * static_cast<T>(factor);
              for (int nb = 0; nb < 9; ++nb) {
                if (need_l) {
                  ln->grad[(static_cast<std::size_t>(nb) * f2 + cell) * hw + px] +=
                      gf * y[nb] * (vals[nb] - mean);
                }
                if (need_d) {
                  const int ni = i + nb / 3 - 1;
                  const int nj = j + nb % 3 - 1;
                  if (ni >= 0 && ni < h && nj >= 0 && nj < w) {
                    dn->grad[static_cast<std::size_t>(ni) * w + nj] += gf * y[nb];
                  }
                }
              }
            }
          }
        }
      });

  const int ow = w * factor;
  T y[9], vals[9];
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const std::size_t px = static_cast<std::size_t>(i) * w + j;
      for (int nb = 0; nb < 9; ++nb) {
        const int ni = i + nb / 3 - 1;
        const int nj = j + nb % 3 - 1;
        vals[nb] = (ni >= 0 && ni < h && nj >= 0 && nj < w)
                       ? disp.value()[static_cast<std::size_t>(ni) * w + nj]
                       : T{0};
      }
      for (int cell = 0; cell < f2; ++cell) {
        softmax_at(logits.value(), px, cell, y);
        T mean = 0;
        for (int nb = 0; nb < 9; ++nb) mean += y[nb] * vals[nb];
        const int oy = i * factor + cell / factor;
        const int ox = j * factor + cell % factor;
        out.value()[static_cast<std::size_t>(oy) * ow + ox] = static_cast<T>(factor) * mean;
      }
    }
  }
  return out;
}

// Forward differences along x: out(c,y,x) = in(c,y,x+1) - in(c,y,x).
template <typename T>
Tensor<T> diff_x(const Tensor<T>& x) {
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (w < 2) throw ConfigError("diff_x: width too small");
  auto xn = x.node();
  Tensor<T> out = Tensor<T>::op({c, h, w - 1}, {xn}, [=](Node<T>& n) {
    if (!xn->requires_grad && !xn->backward_fn) return;
    xn->ensure_grad();
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < h; ++y) {
        const T* g = n.grad.data() + (static_cast<std::size_t>(ch) * h + y) * (w - 1);
        T* gx = xn->grad.data() + (static_cast<std::size_t>(ch) * h + y) * w;
        for (int xx = 0; xx < w - 1; ++xx) {
          gx[xx + 1] += g[xx];
          gx[xx] -= g[xx];
        }
      }
    }
  });
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h; ++y) {
      const T* src = x.value().data() + (static_cast<std::size_t>(ch) * h + y) * w;
      T* dst = out.value().data() + (static_cast<std::size_t>(ch) * h + y) * (w - 1);
      for (int xx = 0; xx < w - 1; ++xx) dst[xx] = src[xx + 1] - src[xx];
    }
  }
  return out;
}

template <typename T>
Tensor<T> diff_y(const Tensor<T>& x) {
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h < 2) throw ConfigError("diff_y: height too small");
  auto xn = x.node();
  Tensor<T> out = Tensor<T>::op({c, h - 1, w}, {xn}, [=](Node<T>& n) {
    if (!xn->requires_grad && !xn->backward_fn) return;
    xn->ensure_grad();
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < h - 1; ++y) {
        const T* g = n.grad.data() + (static_cast<std::size_t>(ch) * (h - 1) + y) * w;
        T* row0 = xn->grad.data() + (static_cast<std::size_t>(ch) * h + y) * w;
        T* row1 = row0 + w;
        for (int xx = 0; xx < w; ++xx) {
          row1[xx] += g[xx];
          row0[xx] -= g[xx];
        }
      }
    }
  });
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h - 1; ++y) {
      const T* row0 = x.value().data() + (static_cast<std::size_t>(ch) * h + y) * w;
      const T* row1 = row0 + w;
      T* dst = out.value().data() + (static_cast<std::size_t>(ch) * (h - 1) + y) * w;
      for (int xx = 0; xx < w; ++xx) dst[xx] = row1[xx] - row0[xx];
    }
  }
  return out;
}

// Mean absolute difference against a constant target over masked entries.
// mask/target must match pred's element count; 0-entries are excluded.
template <typename T>
Tensor<T> masked_l1(const Tensor<T>& pred, std::shared_ptr<const std::vector<T>> target,
                    std::shared_ptr<const std::vector<std::uint8_t>> mask) {
  if (target->size() != pred.numel() || mask->size() != pred.numel()) {
    throw ConfigError("masked_l1: size mismatch");
  }
  std::size_t n_valid = 0;
  for (auto m : *mask) n_valid += (m != 0);
  if (n_valid == 0) throw ConfigError("masked_l1: empty mask");

  auto pn = pred.node();
  Tensor<T> out = Tensor<T>::op({1}, {pn}, [=](Node<T>& n) {
    if (!pn->requires_grad && !pn->backward_fn) return;
    pn->ensure_grad();
    const T g = n.grad[0] / static_cast<T>(n_valid);
    for (std::size_t i = 0; i < pn->value.size(); ++i) {
      if (!(*mask)[i]) continue;
      const T diff = pn->value[i] - (*target)[i];
      if (diff > T{0}) {
        pn->grad[i] += g;
      } else if (diff < T{0}) {
        pn->grad[i] -= g;
      }
    }
  });
  T sum = 0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    if ((*mask)[i]) sum += std::abs(pred.value()[i] - (*target)[i]);
  }
  out.value()[0] = sum / static_cast<T>(n_valid);
  return out;
}

}  // namespace nsl::nn
