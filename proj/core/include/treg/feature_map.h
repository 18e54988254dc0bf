#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace treg {

// Dense channels x height x width grid stored row-major in
// (channel, row, column) order.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(int channels, int height, int width, double fill = 0.0);
  FeatureMap(int channels, int height, int width, std::vector<double> data);

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  int plane_size() const { return height_ * width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int c, int r, int col) {
    return data_[(static_cast<std::size_t>(c) * height_ + r) * width_ + col];
  }
  double at(int c, int r, int col) const {
    return data_[(static_cast<std::size_t>(c) * height_ + r) * width_ + col];
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  std::span<double> channel(int c);
  std::span<const double> channel(int c) const;

  // Channel vector at one spatial cell.
  std::vector<double> cell(int r, int col) const;
  void set_cell(int r, int col, std::span<const double> values);

  bool same_shape(const FeatureMap& other) const {
    return channels_ == other.channels_ && height_ == other.height_ &&
           width_ == other.width_;
  }
  std::string shape_string() const;

  bool all_finite() const;

  // Sub-grid [row0, row0 + rows) x [col0, col0 + cols); cells outside the map
  // are zero-filled.
  FeatureMap crop(int row0, int col0, int rows, int cols) const;

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

// Inner product over all entries; shapes must agree.
double dot(const FeatureMap& a, const FeatureMap& b);

// a*x + b*y elementwise.
FeatureMap axpby(double a, const FeatureMap& x, double b, const FeatureMap& y);

}  // namespace treg
