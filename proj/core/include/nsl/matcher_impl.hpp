#pragma once

// Template definitions for Matcher<T>; matcher.cpp instantiates float and
// double.

#include <cmath>

#include "nsl/matcher.hpp"

namespace nsl {

namespace detail {

using nn::Conv2dLayer;
using nn::InstanceNormLayer;
using nn::ParamStore;
using nn::Tensor;

// Residual block: conv-norm-relu-conv-norm + skip, then relu. Norm layers are
// optional (the context encoder runs without normalization).
template <typename T>
struct ResBlock {
  Conv2dLayer<T> c1, c2;
  InstanceNormLayer<T> n1, n2;
  bool normalized = true;

  static ResBlock make(const std::string& name, int channels, bool normalized) {
    ResBlock b;
    b.c1 = {name + ".c1", channels, channels, 3, 1, 1};
    b.c2 = {name + ".c2", channels, channels, 3, 1, 1};
    b.n1 = {name + ".n1", channels};
    b.n2 = {name + ".n2", channels};
    b.normalized = normalized;
    return b;
  }
  void init(ParamStore<T>& ps, const Rng& rng) const {
    c1.init(ps, rng);
    c2.init(ps, rng);
    if (normalized) {
      n1.init(ps);
      n2.init(ps);
    }
  }
  Tensor<T> operator()(ParamStore<T>& ps, const Tensor<T>& x) const {
    Tensor<T> y = c1(ps, x);
    if (normalized) y = n1(ps, y);
    y = nn::relu(y);
    y = c2(ps, y);
    if (normalized) y = n2(ps, y);
    return nn::relu(nn::add(y, x));
  }
};

template <typename T>
struct FeatureEncoder {
  Conv2dLayer<T> stem, down, proj;
  InstanceNormLayer<T> stem_n, down_n;
  ResBlock<T> res1, res2;

  static FeatureEncoder make(const std::string& name, int base, int feature_dim) {
    FeatureEncoder e;
    e.stem = {name + ".stem", 1, base, 7, 2, 3};
    e.stem_n = {name + ".stem_n", base};
    e.res1 = ResBlock<T>::make(name + ".res1", base, true);
    e.down = {name + ".down", base, 2 * base, 3, 2, 1};
    e.down_n = {name + ".down_n", 2 * base};
    e.res2 = ResBlock<T>::make(name + ".res2", 2 * base, true);
    e.proj = {name + ".proj", 2 * base, feature_dim, 1, 1, 0};
    return e;
  }
  void init(ParamStore<T>& ps, const Rng& rng) const {
    stem.init(ps, rng);
    stem_n.init(ps);
    res1.init(ps, rng);
    down.init(ps, rng);
    down_n.init(ps);
    res2.init(ps, rng);
    proj.init(ps, rng);
  }
  Tensor<T> operator()(ParamStore<T>& ps, const Tensor<T>& x) const {
    Tensor<T> y = nn::relu(stem_n(ps, stem(ps, x)));
    y = res1(ps, y);
    y = nn::relu(down_n(ps, down(ps, y)));
    y = res2(ps, y);
    return proj(ps, y);
  }
};

template <typename T>
struct ContextEncoder {
  Conv2dLayer<T> stem, down, down8, down16;
  ResBlock<T> res1, res2;
  Conv2dLayer<T> inp4, hid4, inp8, hid8, inp16, hid16;

  static ContextEncoder make(const std::string& name, int base, int hidden) {
    ContextEncoder e;
    e.stem = {name + ".stem", 1, base, 7, 2, 3};
    e.res1 = ResBlock<T>::make(name + ".res1", base, false);
    e.down = {name + ".down", base, 2 * base, 3, 2, 1};
    e.res2 = ResBlock<T>::make(name + ".res2", 2 * base, false);
    e.down8 = {name + ".down8", 2 * base, 2 * base, 3, 2, 1};
    e.down16 = {name + ".down16", 2 * base, 2 * base, 3, 2, 1};
    e.inp4 = {name + ".inp4", 2 * base, hidden, 3, 1, 1};
    e.hid4 = {name + ".hid4", 2 * base, hidden, 3, 1, 1};
    e.inp8 = {name + ".inp8", 2 * base, hidden, 3, 1, 1};
    e.hid8 = {name + ".hid8", 2 * base, hidden, 3, 1, 1};
    e.inp16 = {name + ".inp16", 2 * base, hidden, 3, 1, 1};
    e.hid16 = {name + ".hid16", 2 * base, hidden, 3, 1, 1};
    return e;
  }
  void init(ParamStore<T>& ps, const Rng& rng) const {
    for (const auto* c : {&stem, &down, &down8, &down16, &inp4, &hid4, &inp8, &hid8, &inp16,
                          &hid16}) {
      c->init(ps, rng);
    }
    res1.init(ps, rng);
    res2.init(ps, rng);
  }
};

template <typename T>
struct MotionEncoder {
  Conv2dLayer<T> corr1, corr2, disp1, disp2, fuse;

  static MotionEncoder make(const std::string& name, int corr_channels, int hidden) {
    MotionEncoder m;
    const int dh = std::max(hidden / 2, 4);
    m.corr1 = {name + ".corr1", corr_channels, hidden, 1, 1, 0};
    m.corr2 = {name + ".corr2", hidden, hidden, 3, 1, 1};
    m.disp1 = {name + ".disp1", 1, dh, 7, 1, 3};
    m.disp2 = {name + ".disp2", dh, dh, 3, 1, 1};
    m.fuse = {name + ".fuse", hidden + dh, hidden - 1, 3, 1, 1};
    return m;
  }
  void init(ParamStore<T>& ps, const Rng& rng) const {
    for (const auto* c : {&corr1, &corr2, &disp1, &disp2, &fuse}) c->init(ps, rng);
  }
  Tensor<T> operator()(ParamStore<T>& ps, const Tensor<T>& corr, const Tensor<T>& disp) const {
    Tensor<T> c = nn::relu(corr2(ps, nn::relu(corr1(ps, corr))));
    Tensor<T> d = nn::relu(disp2(ps, nn::relu(disp1(ps, disp))));
    Tensor<T> f = nn::relu(fuse(ps, nn::concat_channels<T>({c, d})));
    return nn::concat_channels<T>({f, disp});
  }
};

// Convolutional GRU: update/reset gates from [h, x], candidate from [r*h, x].
// The hidden state stays tanh-bounded in (-1, 1).
template <typename T>
struct GruCell {
  Conv2dLayer<T> convz, convr, convq;

  static GruCell make(const std::string& name, int hidden, int input) {
    GruCell g;
    g.convz = {name + ".z", hidden + input, hidden, 3, 1, 1};
    g.convr = {name + ".r", hidden + input, hidden, 3, 1, 1};
    g.convq = {name + ".q", hidden + input, hidden, 3, 1, 1};
    return g;
  }
  void init(ParamStore<T>& ps, const Rng& rng) const {
    convz.init(ps, rng);
    convr.init(ps, rng);
    convq.init(ps, rng);
  }
  Tensor<T> operator()(ParamStore<T>& ps, const Tensor<T>& h, const Tensor<T>& x) const {
    Tensor<T> hx = nn::concat_channels<T>({h, x});
    Tensor<T> z = nn::sigmoid(convz(ps, hx));
    Tensor<T> r = nn::sigmoid(convr(ps, hx));
    Tensor<T> q = nn::tanh_op(convq(ps, nn::concat_channels<T>({nn::mul(r, h), x})));
    return nn::add(nn::mul(nn::one_minus(z), h), nn::mul(z, q));
  }
};

template <typename T>
struct MatcherNet {
  MatcherConfig cfg;
  FeatureEncoder<T> enc_lp, enc_lr;
  ContextEncoder<T> ctx;
  MotionEncoder<T> motion;
  GruCell<T> gru4, gru8, gru16;
  Conv2dLayer<T> head1, head2;        // disparity update head
  Conv2dLayer<T> mask1, mask2;        // convex upsampling weights

  explicit MatcherNet(const MatcherConfig& c) : cfg(c) {
    const int g = cfg.hidden_dim;
    enc_lp = FeatureEncoder<T>::make("enc_lp", cfg.encoder_base, cfg.feature_dim);
    enc_lr = FeatureEncoder<T>::make("enc_lr", cfg.encoder_base, cfg.feature_dim);
    ctx = ContextEncoder<T>::make("ctx", cfg.encoder_base, g);
    motion = MotionEncoder<T>::make("motion", cfg.corr_channels(), g);
    gru16 = GruCell<T>::make("gru16", g, 2 * g);
    gru8 = GruCell<T>::make("gru8", g, 3 * g);
    gru4 = GruCell<T>::make("gru4", g, 3 * g);
    head1 = {"head.c1", g, g, 3, 1, 1};
    head2 = {"head.c2", g, 1, 3, 1, 1};
    const int f2 = cfg.downsample * cfg.downsample;
    mask1 = {"mask.c1", g, 2 * g, 3, 1, 1};
    mask2 = {"mask.c2", 2 * g, 9 * f2, 1, 1, 0};
  }

  bool uses_lp() const { return cfg.mode != MatcherMode::kStereo; }
  bool uses_lr() const { return cfg.mode != MatcherMode::kMono; }
};

}  // namespace detail

template <typename T>
Matcher<T>::Matcher(MatcherConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
}

template <typename T>
void Matcher<T>::init_params(nn::ParamStore<T>& ps, std::uint64_t seed) const {
  const detail::MatcherNet<T> net(cfg_);
  const Rng root = Rng(seed).derive(0x3a7c4e5u);
  if (net.uses_lp()) net.enc_lp.init(ps, root);
  if (net.uses_lr()) net.enc_lr.init(ps, root);
  net.ctx.init(ps, root);
  net.motion.init(ps, root);
  net.gru16.init(ps, root);
  net.gru8.init(ps, root);
  net.gru4.init(ps, root);
  net.head1.init(ps, root);
  net.head2.init(ps, root);
  if (cfg_.convex_upsampling) {
    net.mask1.init(ps, root);
    net.mask2.init(ps, root);
  }
}

template <typename T>
nn::Tensor<T> Matcher<T>::encode_features(nn::ParamStore<T>& ps, const nn::Tensor<T>& image,
                                          const std::string& which) const {
  const detail::MatcherNet<T> net(cfg_);
  nn::Tensor<T> out;
  if (which == "lp") {
    out = net.enc_lp(ps, image);
  } else if (which == "lr") {
    out = net.enc_lr(ps, image);
  } else {
    throw ConfigError("encode_features: which must be 'lp' or 'lr'");
  }
  nn::check_finite(out, "encode_features");
  return out;
}

template <typename T>
typename Matcher<T>::ContextFeatures Matcher<T>::encode_context(nn::ParamStore<T>& ps,
                                                                const nn::Tensor<T>& left) const {
  const detail::MatcherNet<T> net(cfg_);
  const auto& ctx = net.ctx;
  nn::Tensor<T> y = nn::relu(ctx.stem(ps, left));
  y = ctx.res1(ps, y);
  y = nn::relu(ctx.down(ps, y));
  nn::Tensor<T> t4 = ctx.res2(ps, y);
  nn::Tensor<T> t8 = nn::relu(ctx.down8(ps, t4));
  nn::Tensor<T> t16 = nn::relu(ctx.down16(ps, t8));

  ContextFeatures out;
  out.inp = {nn::relu(ctx.inp4(ps, t4)), nn::relu(ctx.inp8(ps, t8)),
             nn::relu(ctx.inp16(ps, t16))};
  out.hidden = {nn::tanh_op(ctx.hid4(ps, t4)), nn::tanh_op(ctx.hid8(ps, t8)),
                nn::tanh_op(ctx.hid16(ps, t16))};
  for (const auto& t : out.inp) nn::check_finite(t, "encode_context");
  return out;
}

template <typename T>
std::vector<nn::Tensor<T>> build_pyramid(const nn::Tensor<T>& volume, int levels) {
  if (levels < 1) throw ConfigError("build_pyramid: levels must be >= 1");
  if (volume.shape().size() != 3) throw ConfigError("build_pyramid: expects (H,W,K) volume");
  if (volume.dim(2) < (1 << (levels - 1))) {
    throw ConfigError("build_pyramid: last dimension smaller than 2^(levels-1)");
  }
  std::vector<nn::Tensor<T>> pyramid{volume};
  for (int l = 1; l < levels; ++l) {
    pyramid.push_back(nn::avg_pool_last_dim(pyramid.back()));
  }
  return pyramid;
}

template <typename T>
MatcherForward<T> Matcher<T>::forward(nn::ParamStore<T>& ps, const MatcherInput<T>& input,
                                      int iters) const {
  if (iters < 1) throw ConfigError("matcher forward: iters must be >= 1");
  const detail::MatcherNet<T> net(cfg_);

  if (!input.ir_left.defined()) throw ConfigError("matcher forward: missing left image");
  if (net.uses_lp() && !input.pattern.defined()) {
    throw ConfigError("matcher forward: mode requires the pattern image");
  }
  if (net.uses_lr() && !input.ir_right.defined()) {
    throw ConfigError("matcher forward: mode requires the right image");
  }

  const int orig_h = input.ir_left.dim(1);
  const int orig_w = input.ir_left.dim(2);
  // Pad to a multiple of 16 so the 1/4, 1/8 and 1/16 grids nest exactly.
  const int pad_w = (16 - orig_w % 16) % 16;
  const int pad_h = (16 - orig_h % 16) % 16;
  auto prep = [&](const nn::Tensor<T>& t) { return nn::pad_right_bottom(t, pad_w, pad_h); };

  const nn::Tensor<T> left = prep(input.ir_left);

  std::vector<nn::Tensor<T>> pyr_primary, pyr_secondary;
  if (cfg_.mode == MatcherMode::kMono) {
    nn::Tensor<T> fl = net.enc_lp(ps, left);
    nn::Tensor<T> fp = net.enc_lp(ps, prep(input.pattern));
    nn::check_finite(fl, "matcher features");
    pyr_primary = build_pyramid(nn::cost_volume(fl, fp), cfg_.pyramid_levels);
  } else {
    nn::Tensor<T> fl = net.enc_lr(ps, left);
    nn::Tensor<T> fr = net.enc_lr(ps, prep(input.ir_right));
    nn::check_finite(fl, "matcher features");
    pyr_primary = build_pyramid(nn::cost_volume(fl, fr), cfg_.pyramid_levels);
    if (cfg_.mode == MatcherMode::kBino) {
      nn::Tensor<T> fl2 = net.enc_lp(ps, left);
      nn::Tensor<T> fp = net.enc_lp(ps, prep(input.pattern));
      pyr_secondary = build_pyramid(nn::cost_volume(fl2, fp), cfg_.pyramid_levels);
    }
  }

  ContextFeatures ctx = encode_context(ps, left);
  nn::Tensor<T> h4 = ctx.hidden[0];
  nn::Tensor<T> h8 = ctx.hidden[1];
  nn::Tensor<T> h16 = ctx.hidden[2];

  const int h_q = h4.dim(1);
  const int w_q = h4.dim(2);
  nn::Tensor<T> disp = nn::Tensor<T>::leaf({1, h_q, w_q});  // d_0 = 0

  MatcherForward<T> out;
  for (int t = 0; t < iters; ++t) {
    nn::Tensor<T> corr = nn::corr_lookup(pyr_primary, disp, cfg_.lookup_radius);
    if (cfg_.mode == MatcherMode::kBino) {
      // The camera-projector volume is indexed by lp disparity = d * (blp/blr).
      nn::Tensor<T> disp_lp = nn::scale(disp, static_cast<T>(input.baseline_ratio));
      corr = nn::concat_channels<T>(
          {corr, nn::corr_lookup(pyr_secondary, disp_lp, cfg_.lookup_radius)});
    }
    nn::Tensor<T> mot = net.motion(ps, corr, disp);

    h16 = net.gru16(ps, h16, nn::concat_channels<T>({ctx.inp[2], nn::avg_pool2(h8)}));
    h8 = net.gru8(ps, h8,
                  nn::concat_channels<T>(
                      {ctx.inp[1], nn::avg_pool2(h4), nn::upsample_bilinear(h16, 2)}));
    h4 = net.gru4(ps, h4,
                  nn::concat_channels<T>({ctx.inp[0], nn::upsample_bilinear(h8, 2), mot}));

    nn::Tensor<T> delta = net.head2(ps, nn::relu(net.head1(ps, h4)));
    disp = nn::add(disp, delta);
    nn::check_finite(disp, "matcher update");
    out.deltas.push_back(delta);

    nn::Tensor<T> full;
    if (cfg_.convex_upsampling) {
      nn::Tensor<T> logits =
          nn::scale(net.mask2(ps, nn::relu(net.mask1(ps, h4))), static_cast<T>(0.25));
      full = nn::convex_upsample(disp, logits, cfg_.downsample);
    } else {
      full = nn::scale(nn::upsample_bilinear(disp, cfg_.downsample),
                       static_cast<T>(cfg_.downsample));
    }
    out.disp_sequence.push_back(nn::crop_to(full, orig_h, orig_w));
  }
  out.disp_quarter = disp;
  return out;
}

template <typename T>
nn::Tensor<T> sequence_loss(const std::vector<nn::Tensor<T>>& sequence, const DisparityMap& gt,
                            double gamma) {
  if (sequence.empty()) throw ConfigError("sequence_loss: empty sequence");
  const int h = gt.values.height();
  const int w = gt.values.width();
  if (gt.mask.count() == 0) throw ConfigError("sequence_loss: empty ground-truth mask");

  auto target = std::make_shared<std::vector<T>>(static_cast<std::size_t>(h) * w);
  auto mask = std::make_shared<std::vector<std::uint8_t>>(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      (*target)[static_cast<std::size_t>(y) * w + x] = static_cast<T>(gt.values(x, y));
      (*mask)[static_cast<std::size_t>(y) * w + x] = gt.mask.at(x, y) ? 1 : 0;
    }
  }

  const int n = static_cast<int>(sequence.size());
  nn::Tensor<T> total;
  for (int t = 0; t < n; ++t) {
    if (sequence[t].shape() != nn::Shape{1, h, w}) {
      throw ConfigError("sequence_loss: prediction/gt shape mismatch");
    }
    const T weight = static_cast<T>(std::pow(gamma, n - 1 - t));
    nn::Tensor<T> term = nn::scale(nn::masked_l1(sequence[t], target, mask), weight);
    total = t == 0 ? term : nn::add(total, term);
  }
  return total;
}

}  // namespace nsl
