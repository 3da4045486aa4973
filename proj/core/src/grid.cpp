#include "flowsync/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "flowsync/error.hpp"

namespace flowsync {

Grid2D::Grid2D(std::size_t height, std::size_t width, double fill)
    : height_(height), width_(width) {
  if (height == 0 || width == 0) {
    throw ShapeError("Grid2D dimensions must be positive, got " + std::to_string(height) +
                     "x" + std::to_string(width));
  }
  values_.assign(height * width, fill);
  if (!std::isfinite(fill)) throw NumericError("Grid2D fill value is not finite");
}

Grid2D::Grid2D(std::size_t height, std::size_t width, std::vector<double> values)
    : height_(height), width_(width), values_(std::move(values)) {
  if (height == 0 || width == 0) {
    throw ShapeError("Grid2D dimensions must be positive, got " + std::to_string(height) +
                     "x" + std::to_string(width));
  }
  if (values_.size() != height * width) {
    throw ShapeError("Grid2D value count " + std::to_string(values_.size()) +
                     " does not match " + std::to_string(height) + "x" +
                     std::to_string(width));
  }
  ensure_finite("Grid2D construction");
}

void Grid2D::ensure_finite(std::string_view context) const {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw NumericError(std::string(context) + ": non-finite value at index " +
                         std::to_string(i));
    }
  }
}

void require_same_shape(const Grid2D& a, const Grid2D& b, std::string_view context) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(context) + ": shape " + std::to_string(a.height()) + "x" +
                     std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                     std::to_string(b.width()));
  }
}

Grid2D axpby(double a, const Grid2D& x, double b, const Grid2D& y) {
  require_same_shape(x, y, "axpby");
  Grid2D out(x.height(), x.width());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + b * y[i];
  out.ensure_finite("axpby");
  return out;
}

double mean(const Grid2D& g) {
  double s = 0.0;
  for (double v : g.values()) s += v;
  return g.empty() ? 0.0 : s / static_cast<double>(g.size());
}

double variance(const Grid2D& g) {
  if (g.empty()) return 0.0;
  const double m = mean(g);
  double s = 0.0;
  for (double v : g.values()) s += (v - m) * (v - m);
  return s / static_cast<double>(g.size());
}

Grid2D clamped(const Grid2D& g, double lo, double hi) {
  Grid2D out = g;
  for (double& v : out.values()) v = std::clamp(v, lo, hi);
  return out;
}

}  // namespace flowsync
