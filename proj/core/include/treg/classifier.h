#pragma once

#include <span>
#include <vector>

#include "treg/bbox.h"
#include "treg/feature_map.h"

namespace treg::classifier {

// Argmax of a single-channel map; ties go to the smallest row, then column.
GridPos argmax_position(const FeatureMap& score);

// exp(-d^2 / (2 sigma^2)) with d the grid distance to center; 1 at center.
FeatureMap gaussian_label(GridPos center, double sigma, int height, int width);
// Same with a fractional center (row, col) in cell units.
FeatureMap gaussian_label_at(double row, double col, double sigma, int height,
                             int width);

// Multi-channel k x k correlation filter. score = sum over channels of the
// valid cross-correlation, centered into a zero map of the feature size.
struct OnlineFilter {
  FeatureMap weights;  // C x k x k
  double lambda = 1e-2;
  double learning_rate = 1.0;
};

FeatureMap correlate(const FeatureMap& filter, const FeatureMap& feature);
// Adjoints of correlate w.r.t. feature and filter for an upstream score grad.
FeatureMap correlate_backward_feature(const FeatureMap& filter,
                                      const FeatureMap& upstream, int height,
                                      int width);
FeatureMap correlate_backward_filter(const FeatureMap& feature,
                                     const FeatureMap& upstream, int kernel_h,
                                     int kernel_w);

struct FilterSample {
  FeatureMap feature;
  FeatureMap label;  // 1 x H x W
};

struct FitOptions {
  int kernel = 5;
  int iterations = 50;
  // Multiplier on the exact line-search step; (0, 2) keeps descent monotone.
  double learning_rate = 1.0;
};

// Objective sum_s ||filter * f_s - y_s||^2 (valid region) + lambda ||filter||^2.
double filter_objective(const FeatureMap& weights,
                        std::span<const FilterSample> samples, double lambda);

// Polak-Ribiere conjugate gradient with exact line search from zero (or from
// warm_start).
// Records the objective before every iteration and after the last one when
// objective_trace is given. Throws PreconditionError for an empty sample set.
OnlineFilter fit_filter(std::span<const FilterSample> samples, double lambda,
                        const FitOptions& options = {},
                        std::vector<double>* objective_trace = nullptr,
                        const FeatureMap* warm_start = nullptr);

FeatureMap score(const OnlineFilter& filter, const FeatureMap& feature);

double logistic(double x);

struct Location {
  GridPos pos;
  double confidence = 0.0;  // logistic(peak - mean)
};

Location locate(const FeatureMap& score_map);

}  // namespace treg::classifier
