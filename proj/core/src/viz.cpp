#include "nsl/viz.hpp"

#include <cmath>

#include "nsl/error.hpp"

namespace nsl {

namespace {

struct Rgb {
  double r, g, b;
};

// Five-stop heat ramp: navy, cyan, green, yellow, red.
Rgb heat(double t) {
  static const Rgb stops[5] = {
      {0.05, 0.03, 0.53}, {0.0, 0.8, 0.9}, {0.1, 0.85, 0.25}, {0.95, 0.9, 0.1}, {0.85, 0.1, 0.1}};
  t = std::clamp(t, 0.0, 1.0) * 4.0;
  const int i = std::min(3, static_cast<int>(t));
  const double f = t - i;
  return {stops[i].r + f * (stops[i + 1].r - stops[i].r),
          stops[i].g + f * (stops[i + 1].g - stops[i].g),
          stops[i].b + f * (stops[i + 1].b - stops[i].b)};
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

RgbImage colorize(const Raster<double>& values, const ValidityMask* mask, double vmin,
                  double vmax) {
  if (vmin >= vmax) {
    vmin = std::numeric_limits<double>::infinity();
    vmax = -std::numeric_limits<double>::infinity();
    for (int y = 0; y < values.height(); ++y) {
      for (int x = 0; x < values.width(); ++x) {
        if (mask && !mask->at(x, y)) continue;
        vmin = std::min(vmin, values(x, y));
        vmax = std::max(vmax, values(x, y));
      }
    }
    if (!(vmin < vmax)) {
      vmin = 0.0;
      vmax = 1.0;
    }
  }
  RgbImage img(values.width(), values.height());
  for (int y = 0; y < values.height(); ++y) {
    for (int x = 0; x < values.width(); ++x) {
      if (mask && !mask->at(x, y)) continue;  // black
      const Rgb c = heat((values(x, y) - vmin) / (vmax - vmin));
      img.r(x, y) = to_byte(c.r);
      img.g(x, y) = to_byte(c.g);
      img.b(x, y) = to_byte(c.b);
    }
  }
  return img;
}

RgbImage grayscale(const Raster<double>& values) {
  RgbImage img(values.width(), values.height());
  for (int y = 0; y < values.height(); ++y) {
    for (int x = 0; x < values.width(); ++x) {
      const std::uint8_t v = to_byte(values(x, y));
      img.r(x, y) = v;
      img.g(x, y) = v;
      img.b(x, y) = v;
    }
  }
  return img;
}

RgbImage tile_panels(const std::vector<RgbImage>& panels, int columns) {
  if (panels.empty()) throw ConfigError("tile_panels: no panels");
  if (columns < 1) columns = 1;
  const int pw = panels[0].width();
  const int ph = panels[0].height();
  for (const auto& p : panels) {
    if (p.width() != pw || p.height() != ph) throw ConfigError("tile_panels: size mismatch");
  }
  constexpr int kPad = 2;
  const int rows = (static_cast<int>(panels.size()) + columns - 1) / columns;
  RgbImage grid(columns * pw + (columns - 1) * kPad, rows * ph + (rows - 1) * kPad);
  for (std::size_t i = 0; i < panels.size(); ++i) {
    const int cx = (static_cast<int>(i) % columns) * (pw + kPad);
    const int cy = (static_cast<int>(i) / columns) * (ph + kPad);
    for (int y = 0; y < ph; ++y) {
      for (int x = 0; x < pw; ++x) {
        grid.r(cx + x, cy + y) = panels[i].r(x, y);
        grid.g(cx + x, cy + y) = panels[i].g(x, y);
        grid.b(cx + x, cy + y) = panels[i].b(x, y);
      }
    }
  }
  return grid;
}

}  // namespace nsl
