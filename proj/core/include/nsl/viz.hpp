#pragma once

#include <vector>

#include "nsl/geometry.hpp"
#include "nsl/png_io.hpp"

namespace nsl {

// Values mapped through a blue-to-red heat ramp; invalid pixels render black.
// vmin == vmax triggers auto-ranging over the valid pixels.
RgbImage colorize(const Raster<double>& values, const ValidityMask* mask, double vmin,
                  double vmax);

// Grayscale panel for IR images in [0,1].
RgbImage grayscale(const Raster<double>& values);

// Tiles equally sized panels into a grid with a thin separator.
RgbImage tile_panels(const std::vector<RgbImage>& panels, int columns);

}  // namespace nsl
