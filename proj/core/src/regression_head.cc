#include "treg/regression_head.h"

#include <algorithm>
#include <cmath>

#include "treg/classifier.h"
#include "treg/errors.h"

namespace treg::head {

namespace {

FeatureMap relu(FeatureMap m) {
  for (double& v : m.data()) v = std::max(v, 0.0);
  return m;
}

void relu_backward(FeatureMap& grad, const FeatureMap& pre) {
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (pre.data()[i] <= 0.0) grad.data()[i] = 0.0;
  }
}

struct Forward {
  FeatureMap z1, a1, z2, a2, z3, out;
};

Forward forward(const FeatureMap& feature, const HeadParams& p) {
  if (feature.channels() != p.in_channels()) {
    throw ShapeError("regression head expects " + std::to_string(p.in_channels()) +
                     " channels, got " + feature.shape_string());
  }
  Forward f;
  f.z1 = pointwise_apply(p.l1, feature);
  f.a1 = relu(f.z1);
  f.z2 = pointwise_apply(p.l2, f.a1);
  f.a2 = relu(f.z2);
  f.z3 = pointwise_apply(p.l3, f.a2);
  f.out = f.z3;
  for (double& v : f.out.data()) v = std::exp(std::clamp(v, -kMaxLogOffset, kMaxLogOffset));
  return f;
}

}  // namespace

HeadParams HeadParams::random(int in_channels, int hidden, Rng& rng) {
  return {PointwiseLinear::random(hidden, in_channels, true, rng),
          PointwiseLinear::random(hidden, hidden, true, rng),
          PointwiseLinear::random(4, hidden, true, rng)};
}

FeatureMap predict_offsets(const FeatureMap& feature, const HeadParams& params) {
  return forward(feature, params).out;
}

HeadGrads predict_offsets_backward(const FeatureMap& feature,
                                   const HeadParams& params,
                                   const FeatureMap& upstream_grad) {
  Forward f = forward(feature, params);
  if (!upstream_grad.same_shape(f.out)) {
    throw ShapeError("head backward: upstream " + upstream_grad.shape_string() +
                     " vs offsets " + f.out.shape_string());
  }
  FeatureMap g3 = upstream_grad;
  for (std::size_t i = 0; i < g3.size(); ++i) {
    const double z = f.z3.data()[i];
    const bool clamped = z < -kMaxLogOffset || z > kMaxLogOffset;
    g3.data()[i] = clamped ? 0.0 : g3.data()[i] * f.out.data()[i];
  }
  HeadGrads g;
  g.l3 = pointwise_backward(params.l3, f.a2, g3);
  FeatureMap g2 = g.l3.d_input;
  relu_backward(g2, f.z2);
  g.l2 = pointwise_backward(params.l2, f.a1, g2);
  FeatureMap g1 = g.l2.d_input;
  relu_backward(g1, f.z1);
  g.l1 = pointwise_backward(params.l1, feature, g1);
  g.d_feature = g.l1.d_input;
  return g;
}

BBox decode(const Offsets& o, Point p) {
  return BBox::from_corners(p.x - o.l, p.y - o.t, p.x + o.r, p.y + o.b);
}

BBox decode_box(const FeatureMap& offsets, GridPos pos, const GridGeometry& geom) {
  if (offsets.channels() != 4) {
    throw ShapeError("offset map must have 4 channels, got " + offsets.shape_string());
  }
  if (pos.row < 0 || pos.row >= offsets.height() || pos.col < 0 ||
      pos.col >= offsets.width()) {
    throw PreconditionError("decode_box: position outside the grid");
  }
  const Offsets o{offsets.at(0, pos.row, pos.col), offsets.at(1, pos.row, pos.col),
                  offsets.at(2, pos.row, pos.col), offsets.at(3, pos.row, pos.col)};
  return decode(o, geom.point(pos));
}

Offsets encode(const BBox& box, Point p) {
  const Corners c = box.corners();
  return {p.x - c.x1, p.y - c.y1, c.x2 - p.x, c.y2 - p.y};
}

IouLossResult iou_loss(const Offsets& o, Point p, const BBox& gt, IouLossForm form) {
  const Corners g = gt.corners();
  const double x1 = p.x - o.l;
  const double y1 = p.y - o.t;
  const double x2 = p.x + o.r;
  const double y2 = p.y + o.b;

  const double iw = std::min(x2, g.x2) - std::max(x1, g.x1);
  const double ih = std::min(y2, g.y2) - std::max(y1, g.y1);
  const double area_p = (o.l + o.r) * (o.t + o.b);
  const double area_g = (g.x2 - g.x1) * (g.y2 - g.y1);

  IouLossResult res;
  if (iw <= 0.0 || ih <= 0.0) {
    res.iou = 0.0;
    res.loss = form == IouLossForm::OneMinusIou ? 1.0 : -std::log(1e-6);
    return res;
  }
  const double inter = iw * ih;
  const double uni = area_p + area_g - inter;
  res.iou = inter / uni;

  // d inter / d offset: an offset moves its edge outward; it enlarges the
  // intersection only while that edge is the binding (inner) one. On an exact
  // tie the two one-sided derivatives are averaged.
  auto binding = [](double inner, double outer, double extent) {
    return inner > outer ? extent : inner == outer ? extent / 2.0 : 0.0;
  };
  const double di_l = binding(x1, g.x1, ih);
  const double di_r = binding(g.x2, x2, ih);
  const double di_t = binding(y1, g.y1, iw);
  const double di_b = binding(g.y2, y2, iw);
  const double da_lr = o.t + o.b;
  const double da_tb = o.l + o.r;
  const std::array<double, 4> di = {di_l, di_t, di_r, di_b};
  const std::array<double, 4> da = {da_lr, da_tb, da_lr, da_tb};

  double scale = 0.0;
  if (form == IouLossForm::OneMinusIou) {
    res.loss = 1.0 - res.iou;
    scale = -1.0;
  } else {
    const double clamped = std::max(res.iou, 1e-6);
    res.loss = -std::log(clamped);
    scale = res.iou > 1e-6 ? -1.0 / res.iou : 0.0;
  }
  for (int k = 0; k < 4; ++k) {
    const double du = da[k] - di[k];
    const double diou = (di[k] * uni - inter * du) / (uni * uni);
    res.d_offsets[k] = scale * diou;
  }
  return res;
}

double iou_loss(const BBox& pred, const BBox& gt, IouLossForm form) {
  const double v = iou(pred, gt);
  if (form == IouLossForm::OneMinusIou) return 1.0 - v;
  return -std::log(std::max(v, 1e-6));
}

std::vector<RegressionTarget> training_targets(const BBox& gt, GridPos center,
                                               int radius,
                                               const GridGeometry& geom,
                                               int grid_height, int grid_width) {
  if (center.row < 0 || center.row >= grid_height || center.col < 0 ||
      center.col >= grid_width) {
    throw PreconditionError("training_targets: center outside the grid");
  }
  const Corners c = gt.corners();
  std::vector<RegressionTarget> out;
  for (int r = center.row - radius; r <= center.row + radius; ++r) {
    if (r < 0 || r >= grid_height) continue;
    for (int q = center.col - radius; q <= center.col + radius; ++q) {
      if (q < 0 || q >= grid_width) continue;
      const Point p = geom.point({r, q});
      if (p.x <= c.x1 || p.x >= c.x2 || p.y <= c.y1 || p.y >= c.y2) continue;
      out.push_back({{r, q}, encode(gt, p)});
    }
  }
  return out;
}

BBox infer_box(const FeatureMap& offsets, const FeatureMap& score,
               const GridGeometry& geom, InferMode mode, int radius) {
  if (score.channels() != 1 || score.height() != offsets.height() ||
      score.width() != offsets.width()) {
    throw ShapeError("infer_box: score " + score.shape_string() +
                     " vs offsets " + offsets.shape_string());
  }
  const GridPos peak = classifier::argmax_position(score);
  if (mode == InferMode::Argmax) return decode_box(offsets, peak, geom);

  double wsum = 0.0;
  Corners acc;
  for (int r = peak.row - radius; r <= peak.row + radius; ++r) {
    if (r < 0 || r >= score.height()) continue;
    for (int q = peak.col - radius; q <= peak.col + radius; ++q) {
      if (q < 0 || q >= score.width()) continue;
      const double w = std::max(score.at(0, r, q), 0.0);
      if (w == 0.0) continue;
      const Corners c = decode_box(offsets, {r, q}, geom).corners();
      acc.x1 += w * c.x1;
      acc.y1 += w * c.y1;
      acc.x2 += w * c.x2;
      acc.y2 += w * c.y2;
      wsum += w;
    }
  }
  if (wsum <= 0.0) return decode_box(offsets, peak, geom);
  return BBox::from_corners(acc.x1 / wsum, acc.y1 / wsum, acc.x2 / wsum, acc.y2 / wsum);
}

}  // namespace treg::head
