#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace gravtrack {

/// Continuous image coordinate. Pixel centers sit at integer positions.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  friend constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }
  friend constexpr bool operator==(Vec2, Vec2) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }

/// Row-major raster of values.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {}
  Grid(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> pixels() { return data_; }
  std::span<const T> pixels() const { return data_; }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  bool same_shape(const auto& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Single-channel floating-point image. After normalize() values lie in [0, 1].
using Image2D = Grid<double>;

/// Non-negative integer label per pixel; 0 is background.
using LabelMap = Grid<std::int32_t>;

/// Binary mask, 1 = inside.
using Mask = Grid<std::uint8_t>;

/// Per-pixel gravitational acceleration.
struct ForceField2D {
  Image2D fx;
  Image2D fy;

  ForceField2D() = default;
  ForceField2D(int width, int height) : fx(width, height), fy(width, height) {}

  int width() const { return fx.width(); }
  int height() const { return fx.height(); }
  Vec2 at(int x, int y) const { return {fx(x, y), fy(x, y)}; }
  Vec2 at(std::size_t i) const { return {fx[i], fy[i]}; }
  double magnitude(std::size_t i) const { return std::hypot(fx[i], fy[i]); }
};

/// (img - min) / (max - min); a constant image maps to all zeros.
Image2D normalize(const Image2D& img);

/// Clamps p to the raster domain.
Vec2 clamp_to_domain(Vec2 p, int width, int height);

/// Bilinear blend of the four grid values surrounding p (p clamped to the domain).
double bilinear_sample(const Image2D& img, Vec2 p);
Vec2 bilinear_sample(const ForceField2D& field, Vec2 p);

/// Mask of pixels carrying `label`.
Mask mask_of(const LabelMap& labels, std::int32_t label);

/// Largest label value present (0 for an empty or all-background map).
std::int32_t max_label(const LabelMap& labels);

}  // namespace gravtrack
