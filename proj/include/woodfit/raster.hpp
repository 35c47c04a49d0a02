#pragma once

#include <array>
#include <cstdint>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace woodfit {

/// Thrown when image dimensions do not satisfy an operator's requirements.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator-() const { return {-x, -y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  bool operator==(const Vec2&) const = default;
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
/// Counter-clockwise rotation by 90 degrees in a y-down image frame.
inline Vec2 perp(Vec2 v) { return {-v.y, v.x}; }

using Rgb = std::array<double, 3>;

/// Dense row-major raster. Pixel (x, y) has its center at integer coordinates.
template <typename T>
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    if (width < 0 || height < 0) throw DimensionError("negative raster size");
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }
  bool contains(Vec2 p) const {
    return p.x >= 0.0 && p.y >= 0.0 && p.x <= width_ - 1.0 &&
           p.y <= height_ - 1.0;
  }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }

  /// Clamp-to-edge access.
  const T& clamped(int x, int y) const {
    x = x < 0 ? 0 : (x >= width_ ? width_ - 1 : x);
    y = y < 0 ? 0 : (y >= height_ ? height_ - 1 : y);
    return data_[index(x, y)];
  }

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool same_shape(int w, int h) const { return w == width_ && h == height_; }
  template <typename U>
  bool same_shape(const Raster<U>& o) const {
    return o.width() == width_ && o.height() == height_;
  }

  bool operator==(const Raster&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Intensities in [0,1] after load/normalize; also used for signed scalar fields.
using GrayImage = Raster<double>;
using ScalarField = Raster<double>;
using RgbImage = Raster<Rgb>;
using Mask = Raster<std::uint8_t>;

/// Bilinear sample with clamp-to-edge.
double sample_bilinear(const ScalarField& img, Vec2 p);

/// Checks the GrayImage invariants: finite values within [0,1].
bool is_normalized(const GrayImage& img);

/// Per-pixel channel mean.
GrayImage rgb_to_gray_mean(const RgbImage& img);

}  // namespace woodfit
