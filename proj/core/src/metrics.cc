#include "treg/metrics.h"

#include "treg/errors.h"

namespace treg {

TrackResult TrackResult::from_boxes(std::vector<BBox> predicted,
                                    std::vector<BBox> groundtruth) {
  if (predicted.size() != groundtruth.size()) {
    throw ShapeError("track result: " + std::to_string(predicted.size()) +
                     " predictions vs " + std::to_string(groundtruth.size()) +
                     " ground-truth boxes");
  }
  TrackResult r;
  r.iou.reserve(predicted.size());
  r.center_error.reserve(predicted.size());
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    r.iou.push_back(treg::iou(predicted[i], groundtruth[i]));
    r.center_error.push_back(center_distance(predicted[i], groundtruth[i]));
  }
  r.predicted = std::move(predicted);
  r.groundtruth = std::move(groundtruth);
  return r;
}

double success_auc(std::span<const double> ious) {
  if (ious.empty()) throw PreconditionError("success_auc: empty result list");
  // Integer count first so the value does not depend on summation order.
  long hits = 0;
  for (int k = 0; k < kAucThresholds; ++k) {
    const double threshold = k / 20.0;
    for (double v : ious) hits += v > threshold ? 1 : 0;
  }
  return static_cast<double>(hits) /
         (static_cast<double>(kAucThresholds) * static_cast<double>(ious.size()));
}

double success_auc(const TrackResult& result) { return success_auc(result.iou); }

double precision_at(std::span<const double> center_errors, double threshold_px) {
  if (center_errors.empty()) throw PreconditionError("precision_at: empty result list");
  long hits = 0;
  for (double e : center_errors) hits += e <= threshold_px ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(center_errors.size());
}

double precision_at(const TrackResult& result, double threshold_px) {
  return precision_at(result.center_error, threshold_px);
}

double mean_success_auc(std::span<const TrackResult> results) {
  if (results.empty()) throw PreconditionError("mean_success_auc: no sequences");
  double sum = 0.0;
  for (const TrackResult& r : results) sum += success_auc(r);
  return sum / static_cast<double>(results.size());
}

double mean_precision(std::span<const TrackResult> results, double threshold_px) {
  if (results.empty()) throw PreconditionError("mean_precision: no sequences");
  double sum = 0.0;
  for (const TrackResult& r : results) sum += precision_at(r, threshold_px);
  return sum / static_cast<double>(results.size());
}

}  // namespace treg
