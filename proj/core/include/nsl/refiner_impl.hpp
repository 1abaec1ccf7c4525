#pragma once

// Template definitions for Refiner<T>; refiner.cpp instantiates float/double.

#include "nsl/refiner.hpp"

namespace nsl {

namespace refiner_detail {

using nn::Conv2dLayer;
using nn::ParamStore;
using nn::Tensor;

template <typename T>
struct RefinerNet {
  RefinerConfig cfg;
  // Encoder trunk ("enc."): lower learning rate in stage-2 training.
  Conv2dLayer<T> e0, e1a, e1b, e2a, e2b, e3a, e3b, e4a, e4b;
  // Decoder + head ("dec."), prompt path ("prompt.").
  Conv2dLayer<T> u3, u2, u1, u0, head;
  Conv2dLayer<T> p1, p2, p3;

  explicit RefinerNet(const RefinerConfig& c) : cfg(c) {
    const int w0 = cfg.backbone_width;
    const int w1 = 2 * w0, w2 = 4 * w0;
    e0 = {"enc.e0", 1, w0, 3, 1, 1};
    e1a = {"enc.e1a", w0, w1, 3, 2, 1};
    e1b = {"enc.e1b", w1, w1, 3, 1, 1};
    e2a = {"enc.e2a", w1, w2, 3, 2, 1};
    e2b = {"enc.e2b", w2, w2, 3, 1, 1};
    e3a = {"enc.e3a", w2, w2, 3, 2, 1};
    e3b = {"enc.e3b", w2, w2, 3, 1, 1};
    e4a = {"enc.e4a", w2, w2, 3, 2, 1};
    e4b = {"enc.e4b", w2, w2, 3, 1, 1};
    u3 = {"dec.u3", w2 + w2, w2, 3, 1, 1};
    u2 = {"dec.u2", w2 + w2, w2, 3, 1, 1};
    u1 = {"dec.u1", w2 + w1, w1, 3, 1, 1};
    u0 = {"dec.u0", w1 + w0, w0, 3, 1, 1};
    head = {"dec.head", w0, 1, 3, 1, 1};
    p1 = {"prompt.c1", 2, w0, 3, 1, 1};
    p2 = {"prompt.c2", w0, w0, 3, 1, 1};
    p3 = {"prompt.c3", w0, w2, 3, 1, 1};
  }
};

}  // namespace refiner_detail

template <typename T>
Refiner<T>::Refiner(RefinerConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
}

template <typename T>
void Refiner<T>::init_params(nn::ParamStore<T>& ps, std::uint64_t seed) const {
  const refiner_detail::RefinerNet<T> net(cfg_);
  const Rng root = Rng(seed).derive(0x2ef1eu);
  for (const auto* c : {&net.e0, &net.e1a, &net.e1b, &net.e2a, &net.e2b, &net.e3a, &net.e3b,
                        &net.e4a, &net.e4b, &net.u3, &net.u2, &net.u1, &net.u0, &net.head,
                        &net.p1, &net.p2, &net.p3}) {
    c->init(ps, root);
  }
}

template <typename T>
nn::Tensor<T> Refiner<T>::forward(nn::ParamStore<T>& ps, const nn::Tensor<T>& ir,
                                  const nn::Tensor<T>& prompt) const {
  using nn::Tensor;
  const refiner_detail::RefinerNet<T> net(cfg_);
  if (ir.shape().size() != 3 || ir.dim(0) != 1) throw ConfigError("refine: ir must be (1,H,W)");
  if (prompt.dim(0) != 2 || prompt.dim(1) != ir.dim(1) || prompt.dim(2) != ir.dim(2)) {
    throw ConfigError("refine: prompt must be (2,H,W) matching the image");
  }

  const int orig_h = ir.dim(1);
  const int orig_w = ir.dim(2);
  const int pad_w = (16 - orig_w % 16) % 16;
  const int pad_h = (16 - orig_h % 16) % 16;
  Tensor<T> x = nn::pad_right_bottom(ir, pad_w, pad_h);
  Tensor<T> pr = nn::pad_right_bottom(prompt, pad_w, pad_h);

  Tensor<T> f0 = nn::relu(net.e0(ps, x));
  Tensor<T> f1 = nn::relu(net.e1b(ps, nn::relu(net.e1a(ps, f0))));
  Tensor<T> f2 = nn::relu(net.e2b(ps, nn::relu(net.e2a(ps, f1))));
  Tensor<T> f3 = nn::relu(net.e3b(ps, nn::relu(net.e3a(ps, f2))));
  Tensor<T> f4 = nn::relu(net.e4b(ps, nn::relu(net.e4a(ps, f3))));

  // Prompt features at 1/4 resolution (two 2x average pools, then 3 convs).
  Tensor<T> pq = nn::avg_pool2(nn::avg_pool2(pr));
  Tensor<T> pf = net.p3(ps, nn::relu(net.p2(ps, nn::relu(net.p1(ps, pq)))));

  Tensor<T> d3 =
      nn::relu(net.u3(ps, nn::concat_channels<T>({nn::upsample_bilinear(f4, 2), f3})));
  Tensor<T> d2 =
      nn::relu(net.u2(ps, nn::concat_channels<T>({nn::upsample_bilinear(d3, 2), f2})));
  d2 = nn::add(d2, pf);  // structured-light prompt injection
  Tensor<T> d1 =
      nn::relu(net.u1(ps, nn::concat_channels<T>({nn::upsample_bilinear(d2, 2), f1})));
  Tensor<T> d0 =
      nn::relu(net.u0(ps, nn::concat_channels<T>({nn::upsample_bilinear(d1, 2), f0})));
  Tensor<T> depth = nn::softplus(net.head(ps, d0));
  nn::check_finite(depth, "refine");
  return nn::crop_to(depth, orig_h, orig_w);
}

template <typename T>
nn::Tensor<T> stage2_loss_graph(const nn::Tensor<T>& pred, const DepthMap& depth_gt,
                                double alpha) {
  const int h = depth_gt.values.height();
  const int w = depth_gt.values.width();
  if (pred.shape() != nn::Shape{1, h, w}) throw ConfigError("stage2_loss: shape mismatch");
  if (depth_gt.mask.count() == 0) throw ConfigError("stage2_loss: empty mask");

  auto target = std::make_shared<std::vector<T>>(static_cast<std::size_t>(h) * w, T{0});
  auto mask = std::make_shared<std::vector<std::uint8_t>>(static_cast<std::size_t>(h) * w, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      (*target)[i] = static_cast<T>(depth_gt.values(x, y));
      (*mask)[i] = depth_gt.mask.at(x, y) ? 1 : 0;
    }
  }
  nn::Tensor<T> loss = nn::masked_l1(pred, target, mask);
  if (alpha == 0.0) return loss;

  auto tgt_dx = std::make_shared<std::vector<T>>(static_cast<std::size_t>(h) * (w - 1), T{0});
  auto msk_dx = std::make_shared<std::vector<std::uint8_t>>(tgt_dx->size(), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x + 1 < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * (w - 1) + x;
      if (depth_gt.mask.at(x, y) && depth_gt.mask.at(x + 1, y)) {
        (*tgt_dx)[i] = static_cast<T>(depth_gt.values(x + 1, y) - depth_gt.values(x, y));
        (*msk_dx)[i] = 1;
      }
    }
  }
  auto tgt_dy = std::make_shared<std::vector<T>>(static_cast<std::size_t>(h - 1) * w, T{0});
  auto msk_dy = std::make_shared<std::vector<std::uint8_t>>(tgt_dy->size(), 0);
  for (int y = 0; y + 1 < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (depth_gt.mask.at(x, y) && depth_gt.mask.at(x, y + 1)) {
        (*tgt_dy)[i] = static_cast<T>(depth_gt.values(x, y + 1) - depth_gt.values(x, y));
        (*msk_dy)[i] = 1;
      }
    }
  }
  nn::Tensor<T> grad_term = nn::add(nn::masked_l1(nn::diff_x(pred), tgt_dx, msk_dx),
                                    nn::masked_l1(nn::diff_y(pred), tgt_dy, msk_dy));
  return nn::add(loss, nn::scale(grad_term, static_cast<T>(alpha)));
}

}  // namespace nsl
