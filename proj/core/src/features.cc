#include "treg/features.h"

#include <cmath>

#include "treg/errors.h"

namespace treg {

FeatureMap extract_features(const Image& crop, const FeatureConfig& config) {
  if (crop.channels() != 1 || crop.height() != config.crop_px ||
      crop.width() != config.crop_px) {
    throw ShapeError("extract_features expects a 1x" + std::to_string(config.crop_px) +
                     "x" + std::to_string(config.crop_px) + " crop, got " +
                     crop.shape_string());
  }
  const int n = config.grid();
  const int s = config.stride;
  const int px = config.crop_px;

  double mean = 0.0;
  for (double v : crop.data()) mean += v;
  mean /= static_cast<double>(crop.size());

  std::vector<double> intensity(static_cast<std::size_t>(n) * n, 0.0);
  std::vector<double> energy(static_cast<std::size_t>(n) * n, 0.0);
  const double inv_block = 1.0 / (s * s);
  for (int r = 0; r < n; ++r) {
    for (int q = 0; q < n; ++q) {
      double sum = 0.0;
      double grad = 0.0;
      for (int y = r * s; y < (r + 1) * s; ++y) {
        for (int x = q * s; x < (q + 1) * s; ++x) {
          sum += crop.at(0, y, x);
          const double gx = crop.at(0, y, std::min(x + 1, px - 1)) - crop.at(0, y, std::max(x - 1, 0));
          const double gy = crop.at(0, std::min(y + 1, px - 1), x) - crop.at(0, std::max(y - 1, 0), x);
          grad += std::sqrt(gx * gx + gy * gy);
        }
      }
      intensity[static_cast<std::size_t>(r) * n + q] = 4.0 * (sum * inv_block - mean);
      energy[static_cast<std::size_t>(r) * n + q] = 2.0 * grad * inv_block;
    }
  }

  FeatureMap out(config.channels(), n, n);
  auto sample = [n](const std::vector<double>& m, int r, int q) {
    if (r < 0 || q < 0 || r >= n || q >= n) return 0.0;
    return m[static_cast<std::size_t>(r) * n + q];
  };
  static constexpr int kDr[4] = {0, 0, -1, 1};
  static constexpr int kDc[4] = {-1, 1, 0, 0};
  for (int r = 0; r < n; ++r) {
    for (int q = 0; q < n; ++q) {
      int c = 0;
      out.at(c++, r, q) = 1.0;
      out.at(c++, r, q) = sample(intensity, r, q);
      out.at(c++, r, q) = sample(energy, r, q);
      for (int d : config.distances) {
        for (int dir = 0; dir < 4; ++dir) {
          out.at(c++, r, q) = sample(intensity, r + kDr[dir] * d, q + kDc[dir] * d);
          out.at(c++, r, q) = sample(energy, r + kDr[dir] * d, q + kDc[dir] * d);
        }
      }
    }
  }
  return out;
}

CropWindow search_window(const BBox& box, const FeatureConfig& config) {
  const double side = config.search_factor * std::sqrt(box.w * box.h);
  return {box.cx, box.cy, side, config.crop_px};
}

BBox crop_to_map(const BBox& b, const FeatureConfig& config) {
  const double s = config.stride;
  return {b.cx / s, b.cy / s, b.w / s, b.h / s};
}

}  // namespace treg
