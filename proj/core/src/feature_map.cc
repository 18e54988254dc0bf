#include "treg/feature_map.h"

#include <cmath>
#include <sstream>

#include "treg/errors.h"

namespace treg {

FeatureMap::FeatureMap(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width) {
  if (channels <= 0 || height <= 0 || width <= 0) {
    throw ShapeError("FeatureMap dimensions must be positive, got " +
                     std::to_string(channels) + "x" + std::to_string(height) +
                     "x" + std::to_string(width));
  }
  data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
}

FeatureMap::FeatureMap(int channels, int height, int width,
                       std::vector<double> data)
    : FeatureMap(channels, height, width) {
  if (data.size() != data_.size()) {
    throw ShapeError("FeatureMap " + shape_string() + " needs " +
                     std::to_string(data_.size()) + " values, got " +
                     std::to_string(data.size()));
  }
  data_ = std::move(data);
}

std::span<double> FeatureMap::channel(int c) {
  return std::span<double>(data_).subspan(
      static_cast<std::size_t>(c) * plane_size(), plane_size());
}

std::span<const double> FeatureMap::channel(int c) const {
  return std::span<const double>(data_).subspan(
      static_cast<std::size_t>(c) * plane_size(), plane_size());
}

std::vector<double> FeatureMap::cell(int r, int col) const {
  std::vector<double> v(channels_);
  for (int c = 0; c < channels_; ++c) v[c] = at(c, r, col);
  return v;
}

void FeatureMap::set_cell(int r, int col, std::span<const double> values) {
  if (static_cast<int>(values.size()) != channels_) {
    throw ShapeError("cell vector of length " + std::to_string(values.size()) +
                     " does not match " + shape_string());
  }
  for (int c = 0; c < channels_; ++c) at(c, r, col) = values[c];
}

std::string FeatureMap::shape_string() const {
  std::ostringstream os;
  os << channels_ << "x" << height_ << "x" << width_;
  return os.str();
}

bool FeatureMap::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

FeatureMap FeatureMap::crop(int row0, int col0, int rows, int cols) const {
  FeatureMap out(channels_, rows, cols);
  for (int c = 0; c < channels_; ++c) {
    for (int r = 0; r < rows; ++r) {
      const int sr = row0 + r;
      if (sr < 0 || sr >= height_) continue;
      for (int q = 0; q < cols; ++q) {
        const int sc = col0 + q;
        if (sc < 0 || sc >= width_) continue;
        out.at(c, r, q) = at(c, sr, sc);
      }
    }
  }
  return out;
}

double dot(const FeatureMap& a, const FeatureMap& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("dot: " + a.shape_string() + " vs " + b.shape_string());
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

FeatureMap axpby(double a, const FeatureMap& x, double b, const FeatureMap& y) {
  if (!x.same_shape(y)) {
    throw ShapeError("axpby: " + x.shape_string() + " vs " + y.shape_string());
  }
  FeatureMap out = x;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = a * x.data()[i] + b * y.data()[i];
  }
  return out;
}

}  // namespace treg
