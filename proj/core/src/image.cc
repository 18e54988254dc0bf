#include "treg/image.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "treg/errors.h"

namespace treg {

void write_pgm(const std::filesystem::path& path, const Image& image) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path.string());
  os << "P5\n" << image.width() << " " << image.height() << "\n255\n";
  std::string bytes(static_cast<std::size_t>(image.plane_size()), '\0');
  for (int i = 0; i < image.plane_size(); ++i) {
    const double v = std::clamp(image.data()[i], 0.0, 1.0);
    bytes[i] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
  }
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingInputError("image not found: " + path.string());
  std::string magic;
  is >> magic;
  auto next_int = [&]() {
    int v = 0;
    while (is >> std::ws && is.peek() == '#') {
      std::string comment;
      std::getline(is, comment);
    }
    if (!(is >> v)) throw ConfigError("malformed PGM header in " + path.string());
    return v;
  };
  if (magic != "P5") throw ConfigError("not a binary PGM: " + path.string());
  const int w = next_int();
  const int h = next_int();
  const int maxval = next_int();
  if (maxval <= 0 || maxval > 255) {
    throw ConfigError("unsupported PGM maxval in " + path.string());
  }
  is.get();
  std::string bytes(static_cast<std::size_t>(w) * h, '\0');
  is.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (is.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw ConfigError("truncated PGM " + path.string());
  }
  Image image(1, h, w);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    image.data()[i] = static_cast<unsigned char>(bytes[i]) / static_cast<double>(maxval);
  }
  return image;
}

void write_pgm_scaled(const std::filesystem::path& path, const FeatureMap& map) {
  if (map.channels() != 1) {
    throw ShapeError("write_pgm_scaled expects one channel, got " + map.shape_string());
  }
  const auto [lo, hi] = std::minmax_element(map.data().begin(), map.data().end());
  Image scaled(1, map.height(), map.width());
  if (*hi > *lo) {
    for (std::size_t i = 0; i < map.size(); ++i) {
      scaled.data()[i] = (map.data()[i] - *lo) / (*hi - *lo);
    }
  }
  write_pgm(path, scaled);
}

Frame::Frame(const Image& image) : width_(image.width()), height_(image.height()) {
  if (image.channels() != 1) throw ShapeError("Frame expects one channel, got " + image.shape_string());
  levels_.resize(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    levels_[i] = static_cast<std::uint8_t>(std::lround(std::clamp(image.data()[i], 0.0, 1.0) * 255.0));
  }
}

Image Frame::image() const {
  Image out(1, height_, width_);
  for (std::size_t i = 0; i < levels_.size(); ++i) out.data()[i] = levels_[i] / 255.0;
  return out;
}

void quantize_8bit(Image& image) {
  for (double& v : image.data()) v = std::lround(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
}

Image crop_resize(const Image& image, double cx, double cy, double side, int out,
                  double angle) {
  if (side <= 0.0 || out <= 0) throw PreconditionError("crop_resize: empty crop");
  const double mean =
      std::accumulate(image.data().begin(), image.data().end(), 0.0) /
      static_cast<double>(image.size());
  const double step = side / out;
  const double ca = std::cos(angle);
  const double sa = std::sin(angle);
  Image crop(1, out, out);
  for (int r = 0; r < out; ++r) {
    for (int q = 0; q < out; ++q) {
      // Offset of the output pixel center from the crop center, in image px.
      const double ox = (q + 0.5 - out / 2.0) * step;
      const double oy = (r + 0.5 - out / 2.0) * step;
      const double x = cx + ca * ox - sa * oy - 0.5;
      const double y = cy + sa * ox + ca * oy - 0.5;
      const int x0 = static_cast<int>(std::floor(x));
      const int y0 = static_cast<int>(std::floor(y));
      const double fx = x - x0;
      const double fy = y - y0;
      auto px = [&](int yy, int xx) {
        if (xx < 0 || yy < 0 || xx >= image.width() || yy >= image.height()) return mean;
        return image.at(0, yy, xx);
      };
      crop.at(0, r, q) = (1 - fy) * ((1 - fx) * px(y0, x0) + fx * px(y0, x0 + 1)) +
                         fy * ((1 - fx) * px(y0 + 1, x0) + fx * px(y0 + 1, x0 + 1));
    }
  }
  return crop;
}

Image blur(const Image& image, double sigma) {
  if (sigma <= 0.0) return image;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  const double sum = std::accumulate(k.begin(), k.end(), 0.0);
  for (double& v : k) v /= sum;
  Image tmp(1, image.height(), image.width());
  Image out(1, image.height(), image.width());
  const int h = image.height();
  const int w = image.width();
  for (int r = 0; r < h; ++r) {
    for (int q = 0; q < w; ++q) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) s += k[i + radius] * image.at(0, r, std::clamp(q + i, 0, w - 1));
      tmp.at(0, r, q) = s;
    }
  }
  for (int r = 0; r < h; ++r) {
    for (int q = 0; q < w; ++q) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) s += k[i + radius] * tmp.at(0, std::clamp(r + i, 0, h - 1), q);
      out.at(0, r, q) = s;
    }
  }
  return out;
}

BBox CropWindow::to_crop(const BBox& b) const {
  const double s = scale();
  return {(b.cx - cx) * s + out / 2.0, (b.cy - cy) * s + out / 2.0, b.w * s, b.h * s};
}

BBox CropWindow::to_image(const BBox& b) const {
  const double s = scale();
  return {(b.cx - out / 2.0) / s + cx, (b.cy - out / 2.0) / s + cy, b.w / s, b.h / s};
}

}  // namespace treg
