#pragma once

#include <array>
#include <vector>

#include "treg/bbox.h"
#include "treg/feature_map.h"
#include "treg/random.h"
#include "treg/tensor_kernels.h"

namespace treg::head {

// linear -> ReLU -> linear -> ReLU -> linear -> exp, producing per-cell
// (l, t, r, b) distances in image pixels.
struct HeadParams {
  PointwiseLinear l1;  // C -> H
  PointwiseLinear l2;  // H -> H
  PointwiseLinear l3;  // H -> 4

  static HeadParams random(int in_channels, int hidden, Rng& rng);
  int in_channels() const { return l1.in_channels; }

  friend bool operator==(const HeadParams&, const HeadParams&) = default;
};

// Pre-activations are clamped to [-kMaxLogOffset, kMaxLogOffset] before the
// exponential so offsets stay finite.
inline constexpr double kMaxLogOffset = 30.0;

// 4-channel offset map, channels ordered (l, t, r, b). All entries > 0.
FeatureMap predict_offsets(const FeatureMap& feature, const HeadParams& params);

struct HeadGrads {
  PointwiseGrads l1;
  PointwiseGrads l2;
  PointwiseGrads l3;
  FeatureMap d_feature;
};

HeadGrads predict_offsets_backward(const FeatureMap& feature,
                                   const HeadParams& params,
                                   const FeatureMap& upstream_grad);

struct Offsets {
  double l = 0.0;
  double t = 0.0;
  double r = 0.0;
  double b = 0.0;
};

BBox decode(const Offsets& offsets, Point p);
BBox decode_box(const FeatureMap& offsets, GridPos pos, const GridGeometry& geom);

// Exact distances from an image point to the box edges.
Offsets encode(const BBox& box, Point p);

enum class IouLossForm {
  OneMinusIou,  // 1 - IoU
  NegLogIou,    // -ln IoU (clamped at IoU = 1e-6)
};

struct IouLossResult {
  double loss = 0.0;
  double iou = 0.0;
  std::array<double, 4> d_offsets{};  // d loss / d (l, t, r, b)
};

// IoU loss of the box decoded from offsets at p against gt, with the gradient
// w.r.t. the offsets. Where a predicted edge coincides with a ground-truth
// edge the two one-sided derivatives are averaged, so the gradient is zero at
// pred == gt.
IouLossResult iou_loss(const Offsets& pred, Point p, const BBox& gt,
                       IouLossForm form = IouLossForm::OneMinusIou);
double iou_loss(const BBox& pred, const BBox& gt,
                IouLossForm form = IouLossForm::OneMinusIou);

struct RegressionTarget {
  GridPos pos;
  Offsets offsets;
};

// Grid cells within Chebyshev distance radius of center (and inside the
// grid) whose image point lies strictly inside gt, with exact target offsets.
std::vector<RegressionTarget> training_targets(const BBox& gt, GridPos center,
                                               int radius,
                                               const GridGeometry& geom,
                                               int grid_height, int grid_width);

enum class InferMode {
  Argmax,                // decode at the score argmax
  NeighborhoodAverage,   // score-weighted mean of corners around the argmax
};

BBox infer_box(const FeatureMap& offsets, const FeatureMap& score,
               const GridGeometry& geom, InferMode mode = InferMode::Argmax,
               int radius = 2);

}  // namespace treg::head
