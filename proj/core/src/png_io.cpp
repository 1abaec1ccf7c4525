#include "nsl/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "nsl/error.hpp"

namespace nsl {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
  (void)png;
  throw CorruptSampleError(std::string("png: ") + msg);
}

void png_warning_fn(png_structp, png_const_charp) {}

class PngWriter {
 public:
  PngWriter(const std::filesystem::path& path, int width, int height, int bit_depth,
            int color_type) {
    file_ = FilePtr(std::fopen(path.string().c_str(), "wb"));
    if (!file_) throw RuntimeFailure("png: cannot open " + path.string() + " for writing");
    png_ = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
    if (!png_) throw RuntimeFailure("png: writer allocation failed");
    info_ = png_create_info_struct(png_);
    png_init_io(png_, file_.get());
    png_set_IHDR(png_, info_, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png_, info_);
    if (bit_depth == 16) png_set_swap(png_);  // buffers are host little-endian
  }

  ~PngWriter() { png_destroy_write_struct(&png_, &info_); }

  void write_rows(std::vector<png_bytep>& rows) {
    png_write_image(png_, rows.data());
    png_write_end(png_, nullptr);
  }

 private:
  FilePtr file_;
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
};

class PngReader {
 public:
  explicit PngReader(const std::filesystem::path& path) {
    file_ = FilePtr(std::fopen(path.string().c_str(), "rb"));
    if (!file_) throw CorruptSampleError("png: cannot open " + path.string());
    png_ = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
    if (!png_) throw RuntimeFailure("png: reader allocation failed");
    info_ = png_create_info_struct(png_);
    png_init_io(png_, file_.get());
    png_read_info(png_, info_);
  }

  ~PngReader() { png_destroy_read_struct(&png_, &info_, nullptr); }

  int width() const { return png_get_image_width(png_, info_); }
  int height() const { return png_get_image_height(png_, info_); }
  int bit_depth() const { return png_get_bit_depth(png_, info_); }
  int color_type() const { return png_get_color_type(png_, info_); }

  void read_rows(std::vector<png_bytep>& rows) {
    if (bit_depth() == 16) png_set_swap(png_);
    png_read_image(png_, rows.data());
  }

 private:
  FilePtr file_;
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
};

}  // namespace

void write_png_gray16(const std::filesystem::path& path, const Raster<double>& intensities) {
  if (intensities.empty()) throw ConfigError("write_png_gray16: empty raster");
  const int w = intensities.width();
  const int h = intensities.height();
  std::vector<std::uint16_t> buf(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    const double* src = intensities.row(y);
    for (int x = 0; x < w; ++x) {
      const double v = std::clamp(src[x], 0.0, 1.0);
      buf[static_cast<std::size_t>(y) * w + x] =
          static_cast<std::uint16_t>(std::lround(v * 65535.0));
    }
  }
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) {
    rows[y] = reinterpret_cast<png_bytep>(buf.data() + static_cast<std::size_t>(y) * w);
  }
  PngWriter writer(path, w, h, 16, PNG_COLOR_TYPE_GRAY);
  writer.write_rows(rows);
}

Raster<double> read_png_gray16(const std::filesystem::path& path) {
  PngReader reader(path);
  if (reader.color_type() != PNG_COLOR_TYPE_GRAY || reader.bit_depth() != 16) {
    throw CorruptSampleError("png: expected 16-bit grayscale in " + path.string());
  }
  const int w = reader.width();
  const int h = reader.height();
  std::vector<std::uint16_t> buf(static_cast<std::size_t>(w) * h);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) {
    rows[y] = reinterpret_cast<png_bytep>(buf.data() + static_cast<std::size_t>(y) * w);
  }
  reader.read_rows(rows);
  Raster<double> out(w, h);
  for (int y = 0; y < h; ++y) {
    double* dst = out.row(y);
    for (int x = 0; x < w; ++x) dst[x] = buf[static_cast<std::size_t>(y) * w + x] / 65535.0;
  }
  return out;
}

void write_png_gray8(const std::filesystem::path& path, const Raster<double>& intensities) {
  if (intensities.empty()) throw ConfigError("write_png_gray8: empty raster");
  const int w = intensities.width();
  const int h = intensities.height();
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    const double* src = intensities.row(y);
    for (int x = 0; x < w; ++x) {
      buf[static_cast<std::size_t>(y) * w + x] =
          static_cast<std::uint8_t>(std::lround(std::clamp(src[x], 0.0, 1.0) * 255.0));
    }
  }
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = buf.data() + static_cast<std::size_t>(y) * w;
  PngWriter writer(path, w, h, 8, PNG_COLOR_TYPE_GRAY);
  writer.write_rows(rows);
}

void write_png_mask(const std::filesystem::path& path, const ValidityMask& mask) {
  if (mask.empty()) throw ConfigError("write_png_mask: empty mask");
  const int w = mask.width();
  const int h = mask.height();
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      buf[static_cast<std::size_t>(y) * w + x] = mask.at(x, y) ? 255 : 0;
    }
  }
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = buf.data() + static_cast<std::size_t>(y) * w;
  PngWriter writer(path, w, h, 8, PNG_COLOR_TYPE_GRAY);
  writer.write_rows(rows);
}

ValidityMask read_png_mask(const std::filesystem::path& path) {
  PngReader reader(path);
  if (reader.color_type() != PNG_COLOR_TYPE_GRAY || reader.bit_depth() != 8) {
    throw CorruptSampleError("png: expected 8-bit grayscale mask in " + path.string());
  }
  const int w = reader.width();
  const int h = reader.height();
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(w) * h);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = buf.data() + static_cast<std::size_t>(y) * w;
  reader.read_rows(rows);
  ValidityMask mask(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      mask.set(x, y, buf[static_cast<std::size_t>(y) * w + x] >= 128);
    }
  }
  return mask;
}

void write_png_rgb8(const std::filesystem::path& path, const RgbImage& image) {
  if (image.r.empty()) throw ConfigError("write_png_rgb8: empty image");
  const int w = image.width();
  const int h = image.height();
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t o = (static_cast<std::size_t>(y) * w + x) * 3;
      buf[o + 0] = image.r(x, y);
      buf[o + 1] = image.g(x, y);
      buf[o + 2] = image.b(x, y);
    }
  }
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = buf.data() + static_cast<std::size_t>(y) * w * 3;
  PngWriter writer(path, w, h, 8, PNG_COLOR_TYPE_RGB);
  writer.write_rows(rows);
}

}  // namespace nsl
