#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace flowsync {

/// Row-major 2-D grid of doubles. Frames, noise draws and velocity fields all
/// live in this type.
class Grid2D {
 public:
  Grid2D() = default;
  /// Zero-filled grid. Throws ShapeError on a zero dimension.
  Grid2D(std::size_t height, std::size_t width, double fill = 0.0);
  /// Takes ownership of `values`; throws ShapeError if the length does not
  /// match and NumericError if any value is non-finite.
  Grid2D(std::size_t height, std::size_t width, std::vector<double> values);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t y, std::size_t x) { return values_[y * width_ + x]; }
  double operator()(std::size_t y, std::size_t x) const { return values_[y * width_ + x]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  bool same_shape(const Grid2D& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  /// Throws NumericError naming `context` if any value is NaN or infinite.
  void ensure_finite(std::string_view context) const;

  friend bool operator==(const Grid2D&, const Grid2D&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> values_;
};

using FrameSequence = std::vector<Grid2D>;

/// Throws ShapeError unless `a` and `b` have identical dimensions.
void require_same_shape(const Grid2D& a, const Grid2D& b, std::string_view context);

/// a*x + b*y elementwise.
Grid2D axpby(double a, const Grid2D& x, double b, const Grid2D& y);

double mean(const Grid2D& g);
double variance(const Grid2D& g);

/// Values clamped into [lo, hi].
Grid2D clamped(const Grid2D& g, double lo = 0.0, double hi = 1.0);

}  // namespace flowsync
