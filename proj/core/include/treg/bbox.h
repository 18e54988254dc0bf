#pragma once

#include <compare>
#include <string>

namespace treg {

struct Corners {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;
};

// Axis-aligned box in center form. Image coordinates are continuous: pixel
// (px, py) covers [px, px + 1) x [py, py + 1).
struct BBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  static BBox from_corners(double x1, double y1, double x2, double y2) {
    return {(x1 + x2) / 2.0, (y1 + y2) / 2.0, x2 - x1, y2 - y1};
  }
  static BBox from_corners(const Corners& c) {
    return from_corners(c.x1, c.y1, c.x2, c.y2);
  }

  Corners corners() const {
    return {cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0};
  }
  double area() const { return w * h; }
  bool valid() const;

  friend bool operator==(const BBox&, const BBox&) = default;
};

std::string to_string(const BBox& b);

// Integer cell index on a feature grid.
struct GridPos {
  int row = 0;
  int col = 0;
  friend auto operator<=>(const GridPos&, const GridPos&) = default;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Mapping between feature cells and image points: cell (r, c) sits at
// (origin_x + stride * c, origin_y + stride * r).
struct GridGeometry {
  double stride = 4.0;
  double origin_x = 2.0;
  double origin_y = 2.0;

  Point point(GridPos p) const {
    return {origin_x + stride * p.col, origin_y + stride * p.row};
  }
  // Nearest cell to an image point, not clamped to any grid.
  GridPos nearest(double x, double y) const;
};

// Intersection over union; 0 for disjoint boxes.
double iou(const BBox& a, const BBox& b);

// Distance between box centers.
double center_distance(const BBox& a, const BBox& b);

}  // namespace treg
