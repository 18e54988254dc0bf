#pragma once

#include <span>
#include <vector>

#include "treg/bbox.h"

namespace treg {

// Per-frame tracking outcome of one sequence.
struct TrackResult {
  std::vector<BBox> predicted;
  std::vector<BBox> groundtruth;
  std::vector<double> iou;
  std::vector<double> center_error;  // pixels

  // Fills iou and center_error from the two box lists (ShapeError if their
  // lengths differ).
  static TrackResult from_boxes(std::vector<BBox> predicted,
                                std::vector<BBox> groundtruth);
  std::size_t frames() const { return iou.size(); }
};

// IoU thresholds 0, 0.05, ..., 1.
inline constexpr int kAucThresholds = 21;

// Mean over the thresholds of the fraction of frames with IoU > threshold.
// PreconditionError on an empty list.
double success_auc(std::span<const double> ious);
double success_auc(const TrackResult& result);

// Fraction of frames with center error <= threshold_px.
double precision_at(std::span<const double> center_errors, double threshold_px = 20.0);
double precision_at(const TrackResult& result, double threshold_px = 20.0);

// Suite-level scores: the mean of the per-sequence scores.
double mean_success_auc(std::span<const TrackResult> results);
double mean_precision(std::span<const TrackResult> results, double threshold_px = 20.0);

}  // namespace treg
