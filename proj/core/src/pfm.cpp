#include "nsl/pfm.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "nsl/error.hpp"

namespace nsl {

namespace {

bool host_is_little_endian() {
  const std::uint16_t probe = 1;
  std::uint8_t byte;
  std::memcpy(&byte, &probe, 1);
  return byte == 1;
}

}  // namespace

void write_pfm(const std::filesystem::path& path, const Raster<double>& raster) {
  if (raster.empty()) throw ConfigError("write_pfm: empty raster");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("write_pfm: cannot open " + path.string());

  out << "Pf\n" << raster.width() << " " << raster.height() << "\n-1.0\n";

  std::vector<float> row(raster.width());
  for (int y = raster.height() - 1; y >= 0; --y) {
    const double* src = raster.row(y);
    for (int x = 0; x < raster.width(); ++x) row[x] = static_cast<float>(src[x]);
    if (!host_is_little_endian()) {
      for (float& v : row) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        bits = __builtin_bswap32(bits);
        std::memcpy(&v, &bits, 4);
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()), raster.width() * sizeof(float));
  }
  if (!out) throw RuntimeFailure("write_pfm: write failed for " + path.string());
}

Raster<double> read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptSampleError("read_pfm: cannot open " + path.string());

  std::string magic;
  int width = 0;
  int height = 0;
  double scale = 0.0;
  in >> magic >> width >> height >> scale;
  if (!in || magic != "Pf") throw CorruptSampleError("read_pfm: bad header in " + path.string());
  if (width <= 0 || height <= 0) {
    throw CorruptSampleError("read_pfm: bad dimensions in " + path.string());
  }
  if (scale == 0.0) throw CorruptSampleError("read_pfm: zero scale in " + path.string());
  in.get();  // single whitespace byte terminating the header

  const bool file_little_endian = scale < 0.0;
  Raster<double> raster(width, height);
  std::vector<float> row(width);
  for (int y = height - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()), width * sizeof(float));
    if (in.gcount() != static_cast<std::streamsize>(width * sizeof(float))) {
      throw CorruptSampleError("read_pfm: truncated data in " + path.string());
    }
    if (file_little_endian != host_is_little_endian()) {
      for (float& v : row) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        bits = __builtin_bswap32(bits);
        std::memcpy(&v, &bits, 4);
      }
    }
    double* dst = raster.row(y);
    for (int x = 0; x < width; ++x) dst[x] = row[x];
  }
  return raster;
}

}  // namespace nsl
