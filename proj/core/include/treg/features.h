#pragma once

#include <vector>

#include "treg/bbox.h"
#include "treg/feature_map.h"
#include "treg/image.h"

namespace treg {

// Fixed (non-learned) feature extractor that stands in for a backbone. Each
// stride x stride block of a search crop becomes one cell carrying
//   [1, intensity, edge energy, and both again sampled at every listed
//    distance to the left, right, above and below]
// so a single cell sees the target extent along the four box directions.
struct FeatureConfig {
  int crop_px = 96;            // search crop side in crop pixels
  int stride = 4;              // crop pixels per feature cell
  double search_factor = 4.0;  // crop side = factor * sqrt(w * h)
  std::vector<int> distances = {1, 2, 3, 4, 6, 8};

  int grid() const { return crop_px / stride; }
  int channels() const { return 3 + 8 * static_cast<int>(distances.size()); }
  GridGeometry geometry() const {
    return {static_cast<double>(stride), stride / 2.0, stride / 2.0};
  }

  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

FeatureMap extract_features(const Image& crop, const FeatureConfig& config);

// Crop window around a box following the search-area rule.
CropWindow search_window(const BBox& box, const FeatureConfig& config);

// Box in crop pixels -> box in feature-map coordinates (see roi_pool).
BBox crop_to_map(const BBox& crop_box, const FeatureConfig& config);

}  // namespace treg
