#include "nsl/patterns.hpp"

#include <cmath>

#include "nsl/error.hpp"
#include "nsl/rng.hpp"

namespace nsl {

const PatternKind kTrainPatternKinds[6] = {
    PatternKind::kDotsD415,  PatternKind::kDotsD435, PatternKind::kRandomBinary,
    PatternKind::kSinCos,    PatternKind::kAlacarte, PatternKind::kAlacarteRoll,
};
const PatternKind kTestPatternKinds[2] = {
    PatternKind::kKinectDots,
    PatternKind::kRandomSquare,
};

const char* to_string(PatternKind kind) {
  switch (kind) {
    case PatternKind::kDotsD415: return "dots_d415";
    case PatternKind::kDotsD435: return "dots_d435";
    case PatternKind::kKinectDots: return "kinect_dots";
    case PatternKind::kRandomBinary: return "random_binary";
    case PatternKind::kRandomSquare: return "random_square";
    case PatternKind::kSinCos: return "sincos";
    case PatternKind::kAlacarte: return "alacarte";
    case PatternKind::kAlacarteRoll: return "alacarte_roll";
  }
  throw ConfigError("unknown pattern kind");
}

PatternKind pattern_kind_from_string(const std::string& name) {
  for (int i = 0; i < kNumPatternKinds; ++i) {
    const auto kind = static_cast<PatternKind>(i);
    if (name == to_string(kind)) return kind;
  }
  throw ConfigError("unknown pattern kind: " + name);
}

void PatternSpec::validate() const {
  if (width < 8 || height < 8) throw ConfigError("pattern: width and height must be >= 8");
  to_string(kind);  // rejects out-of-range enum values
  for (const auto& [key, value] : params) {
    if (!std::isfinite(value)) throw ConfigError("pattern: parameter " + key + " is not finite");
  }
}

namespace {

double param_or(const PatternSpec& spec, const std::string& key, double fallback) {
  auto it = spec.params.find(key);
  return it == spec.params.end() ? fallback : it->second;
}

// Separate sub-streams per concern so adding draws to one generator never
// shifts another.
enum StreamTag : std::uint64_t {
  kStreamPixels = 1,
  kStreamColumns = 2,
  kStreamRowShifts = 3,
  kStreamSquares = 4,
  kStreamDots = 5,
};

PatternImage make_blank(const PatternSpec& spec) {
  PatternImage img;
  img.intensities = Raster<double>(spec.width, spec.height, 0.0);
  return img;
}

PatternImage gen_random_binary(const PatternSpec& spec) {
  const double p = param_or(spec, "bernoulli_p", 0.5);
  if (p < 0.0 || p > 1.0) throw ConfigError("pattern: bernoulli_p must be in [0,1]");
  PatternImage img = make_blank(spec);
  Rng rng = Rng(spec.seed).derive(kStreamPixels);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const std::uint64_t idx = static_cast<std::uint64_t>(y) * spec.width + x;
      img.intensities(x, y) = rng.double_at(idx) < p ? 1.0 : 0.0;
    }
  }
  return img;
}

// 1-D binary column code, constant down each column.
PatternImage gen_alacarte(const PatternSpec& spec) {
  const double p = param_or(spec, "bernoulli_p", 0.5);
  PatternImage img = make_blank(spec);
  Rng rng = Rng(spec.seed).derive(kStreamColumns);
  for (int x = 0; x < spec.width; ++x) {
    const double v = rng.double_at(static_cast<std::uint64_t>(x)) < p ? 1.0 : 0.0;
    for (int y = 0; y < spec.height; ++y) img.intensities(x, y) = v;
  }
  return img;
}

// Alacarte with each row cyclically shifted by a per-row offset, turning the
// column code into a 2-D pattern.
PatternImage gen_alacarte_roll(const PatternSpec& spec) {
  PatternSpec base = spec;
  base.kind = PatternKind::kAlacarte;
  const PatternImage alacarte = generate_pattern(base);
  PatternImage img = make_blank(spec);
  Rng rng = Rng(spec.seed).derive(kStreamRowShifts);
  for (int y = 0; y < spec.height; ++y) {
    const int shift = static_cast<int>(rng.at(static_cast<std::uint64_t>(y)) %
                                       static_cast<std::uint64_t>(spec.width));
    for (int x = 0; x < spec.width; ++x) {
      img.intensities(x, y) = alacarte.intensities((x + shift) % spec.width, y);
    }
  }
  return img;
}

PatternImage gen_sincos(const PatternSpec& spec) {
  const double tx = param_or(spec, "period_x", 16.0);
  const double ty = param_or(spec, "period_y", 16.0);
  if (tx <= 0.0 || ty <= 0.0) throw ConfigError("pattern: sincos periods must be positive");
  PatternImage img = make_blank(spec);
  constexpr double kTau = 6.283185307179586476925287;
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      img.intensities(x, y) =
          0.5 + 0.25 * std::sin(kTau * x / tx) + 0.25 * std::cos(kTau * y / ty);
    }
  }
  return img;
}

PatternImage gen_random_square(const PatternSpec& spec) {
  const int side_min = static_cast<int>(param_or(spec, "square_min", 3.0));
  const int side_max = static_cast<int>(param_or(spec, "square_max", 9.0));
  const double coverage = param_or(spec, "square_coverage", 0.30);
  if (side_min < 1 || side_max < side_min) throw ConfigError("pattern: bad square side range");
  if (coverage <= 0.0 || coverage > 1.0) throw ConfigError("pattern: bad square coverage");

  PatternImage img = make_blank(spec);
  Rng rng = Rng(spec.seed).derive(kStreamSquares);
  const std::size_t target = static_cast<std::size_t>(coverage * spec.width * spec.height);
  std::size_t bright = 0;
  const int max_attempts = 16 * spec.width * spec.height;
  for (int attempt = 0; attempt < max_attempts && bright < target; ++attempt) {
    const int side = side_min + static_cast<int>(rng.next_below(side_max - side_min + 1));
    const int x0 = static_cast<int>(rng.next_below(spec.width));
    const int y0 = static_cast<int>(rng.next_below(spec.height));
    for (int y = y0; y < std::min(y0 + side, spec.height); ++y) {
      for (int x = x0; x < std::min(x0 + side, spec.width); ++x) {
        if (img.intensities(x, y) == 0.0) {
          img.intensities(x, y) = 1.0;
          ++bright;
        }
      }
    }
  }
  return img;
}

// Jittered-grid dots: one bright pixel per grid cell, offset pseudorandomly
// within the cell. Pitch is chosen so the bright fraction approximates the
// requested density.
PatternImage gen_dots(const PatternSpec& spec, double default_density) {
  const double density = param_or(spec, "dot_density", default_density);
  if (density <= 0.0 || density > 0.5) throw ConfigError("pattern: dot_density out of range");
  PatternImage img = make_blank(spec);
  Rng rng = Rng(spec.seed).derive(kStreamDots);
  const double pitch = std::sqrt(1.0 / density);
  const int cells_x = std::max(1, static_cast<int>(std::ceil(spec.width / pitch)));
  const int cells_y = std::max(1, static_cast<int>(std::ceil(spec.height / pitch)));
  for (int cy = 0; cy < cells_y; ++cy) {
    for (int cx = 0; cx < cells_x; ++cx) {
      const std::uint64_t cell = static_cast<std::uint64_t>(cy) * cells_x + cx;
      const double jx = rng.double_at(2 * cell);
      const double jy = rng.double_at(2 * cell + 1);
      const int x = static_cast<int>((cx + jx) * pitch);
      const int y = static_cast<int>((cy + jy) * pitch);
      if (x >= 0 && x < spec.width && y >= 0 && y < spec.height) {
        img.intensities(x, y) = 1.0;
      }
    }
  }
  return img;
}

}  // namespace

PatternImage generate_pattern(const PatternSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case PatternKind::kRandomBinary: return gen_random_binary(spec);
    case PatternKind::kAlacarte: return gen_alacarte(spec);
    case PatternKind::kAlacarteRoll: return gen_alacarte_roll(spec);
    case PatternKind::kSinCos: return gen_sincos(spec);
    case PatternKind::kRandomSquare: return gen_random_square(spec);
    case PatternKind::kDotsD415: return gen_dots(spec, 0.08);
    case PatternKind::kDotsD435: return gen_dots(spec, 0.10);
    case PatternKind::kKinectDots: return gen_dots(spec, 0.06);
  }
  throw ConfigError("unknown pattern kind");
}

}  // namespace nsl
