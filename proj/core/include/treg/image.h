#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "treg/bbox.h"
#include "treg/feature_map.h"

namespace treg {

// Grayscale images are single-channel feature maps with values in [0, 1].
using Image = FeatureMap;

// 8-bit grayscale frame as kept in sequences. image() returns level / 255, so
// a frame built from an already quantized image gives back the same values.
class Frame {
 public:
  Frame() = default;
  // Single-channel image; values are clamped to [0, 1] and rounded to the
  // nearest of the 256 levels.
  explicit Frame(const Image& image);

  int width() const { return width_; }
  int height() const { return height_; }
  const std::vector<std::uint8_t>& levels() const { return levels_; }
  Image image() const;

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> levels_;
};

// Binary 8-bit PGM (P5, maxval 255). Values are clamped to [0, 1] and
// rounded to the nearest level.
void write_pgm(const std::filesystem::path& path, const Image& image);
Image read_pgm(const std::filesystem::path& path);

// Min-max scales a single-channel map to [0, 255]; a constant map is written
// as all zeros.
void write_pgm_scaled(const std::filesystem::path& path, const FeatureMap& map);

// Rounds every value to the nearest of the 256 PGM levels.
void quantize_8bit(Image& image);

// Square crop of side `side` pixels centered at (cx, cy), rotated by `angle`
// radians about its center and resampled bilinearly to out x out pixels.
// Samples outside the image take the image mean.
Image crop_resize(const Image& image, double cx, double cy, double side, int out,
                  double angle = 0.0);

// Separable Gaussian blur with border clamping.
Image blur(const Image& image, double sigma);

// Mapping between a search crop and the full image.
struct CropWindow {
  double cx = 0.0;     // crop center in the image
  double cy = 0.0;
  double side = 1.0;   // crop side in image pixels
  int out = 1;         // crop side in crop pixels

  double scale() const { return out / side; }
  BBox to_crop(const BBox& image_box) const;
  BBox to_image(const BBox& crop_box) const;
};

}  // namespace treg
