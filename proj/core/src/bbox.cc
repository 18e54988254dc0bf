#include "treg/bbox.h"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace treg {

bool BBox::valid() const {
  return std::isfinite(cx) && std::isfinite(cy) && std::isfinite(w) &&
         std::isfinite(h) && w > 0.0 && h > 0.0;
}

std::string to_string(const BBox& b) {
  std::ostringstream os;
  os << "BBox(cx=" << b.cx << ", cy=" << b.cy << ", w=" << b.w << ", h=" << b.h
     << ")";
  return os.str();
}

GridPos GridGeometry::nearest(double x, double y) const {
  return {static_cast<int>(std::lround((y - origin_y) / stride)),
          static_cast<int>(std::lround((x - origin_x) / stride))};
}

double iou(const BBox& a, const BBox& b) {
  const Corners ca = a.corners();
  const Corners cb = b.corners();
  const double iw = std::min(ca.x2, cb.x2) - std::max(ca.x1, cb.x1);
  const double ih = std::min(ca.y2, cb.y2) - std::max(ca.y1, cb.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  // Areas from corners so that identical boxes give exactly 1.
  const double inter = iw * ih;
  const double area_a = (ca.x2 - ca.x1) * (ca.y2 - ca.y1);
  const double area_b = (cb.x2 - cb.x1) * (cb.y2 - cb.y1);
  const double uni = area_a + area_b - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double center_distance(const BBox& a, const BBox& b) {
  return std::hypot(a.cx - b.cx, a.cy - b.cy);
}

}  // namespace treg
