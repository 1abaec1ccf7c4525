#pragma once

#include <cassert>
#include <cstdint>
#include <span>
#include <vector>

#include "nsl/error.hpp"

namespace nsl {

// Dense row-major 2-D grid. (x, y) indexing with x the column.
template <typename T>
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, T fill = T{}) {
    if (width <= 0 || height <= 0) {
      throw ConfigError("Raster dimensions must be positive");
    }
    width_ = width;
    height_ = height;
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  std::size_t size() const { return data_.size(); }
  bool same_shape(const Raster& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  T& operator()(int x, int y) {
    assert(in_bounds(x, y));
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  const T& operator()(int x, int y) const {
    assert(in_bounds(x, y));
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }

  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width_ && y >= 0 && y < height_;
  }

  T* row(int y) { return data_.data() + static_cast<std::size_t>(y) * width_; }
  const T* row(int y) const { return data_.data() + static_cast<std::size_t>(y) * width_; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  void fill(T v) { data_.assign(data_.size(), v); }

  template <typename U>
  Raster<U> cast() const {
    Raster<U> out(width_, height_);
    for (std::size_t i = 0; i < data_.size(); ++i) out.values()[i] = static_cast<U>(data_[i]);
    return out;
  }

  friend bool operator==(const Raster& a, const Raster& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.data_ == b.data_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

// Per-pixel validity; nonzero means valid.
class ValidityMask {
 public:
  ValidityMask() = default;
  ValidityMask(int width, int height, bool valid = false)
      : grid_(width, height, valid ? std::uint8_t{1} : std::uint8_t{0}) {}

  int width() const { return grid_.width(); }
  int height() const { return grid_.height(); }
  bool empty() const { return grid_.empty(); }

  bool at(int x, int y) const { return grid_(x, y) != 0; }
  void set(int x, int y, bool valid) { grid_(x, y) = valid ? 1 : 0; }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto v : grid_.values()) n += (v != 0);
    return n;
  }

  bool same_shape(const ValidityMask& other) const { return grid_.same_shape(other.grid_); }

  // Intersection; shapes must match.
  ValidityMask operator&(const ValidityMask& other) const {
    if (!same_shape(other)) throw ConfigError("mask shape mismatch");
    ValidityMask out(width(), height());
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      out.grid_.values()[i] = grid_.values()[i] & other.grid_.values()[i];
    }
    return out;
  }

  Raster<std::uint8_t>& raw() { return grid_; }
  const Raster<std::uint8_t>& raw() const { return grid_; }

  friend bool operator==(const ValidityMask& a, const ValidityMask& b) {
    return a.grid_ == b.grid_;
  }

 private:
  Raster<std::uint8_t> grid_;
};

}  // namespace nsl
