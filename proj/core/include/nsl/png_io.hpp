#pragma once

#include <cstdint>
#include <filesystem>

#include "nsl/raster.hpp"

namespace nsl {

// Intensity in [0,1] -> 16-bit grayscale PNG, value = round(v * 65535).
void write_png_gray16(const std::filesystem::path& path, const Raster<double>& intensities);
Raster<double> read_png_gray16(const std::filesystem::path& path);

// Intensity in [0,1] -> 8-bit grayscale PNG, value = round(v * 255).
void write_png_gray8(const std::filesystem::path& path, const Raster<double>& intensities);

// Mask as 8-bit grayscale, valid = 255, invalid = 0.
void write_png_mask(const std::filesystem::path& path, const ValidityMask& mask);
ValidityMask read_png_mask(const std::filesystem::path& path);

// Interleaved 8-bit RGB, for report figures.
struct RgbImage {
  Raster<std::uint8_t> r, g, b;
  RgbImage() = default;
  RgbImage(int width, int height) : r(width, height), g(width, height), b(width, height) {}
  int width() const { return r.width(); }
  int height() const { return r.height(); }
};
void write_png_rgb8(const std::filesystem::path& path, const RgbImage& image);

}  // namespace nsl
