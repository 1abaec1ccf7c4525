#pragma once

#include <filesystem>

#include "nsl/raster.hpp"

namespace nsl {

// Single-channel PFM ("Pf"), little-endian float32, scale header -1.0,
// bottom-up row order as in the Middlebury tools. Values are quantized to
// float32 on write; float32 payloads round-trip bit-exactly.
void write_pfm(const std::filesystem::path& path, const Raster<double>& raster);

// Throws CorruptSampleError on malformed or truncated files.
Raster<double> read_pfm(const std::filesystem::path& path);

}  // namespace nsl
