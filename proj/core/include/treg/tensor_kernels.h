#pragma once

#include <functional>
#include <span>
#include <vector>

#include "treg/bbox.h"
#include "treg/feature_map.h"
#include "treg/random.h"

namespace treg {

// 1x1 convolution: every cell vector is mapped by the same out x in matrix.
// Over a stack of templates this is also the 1x1x1 3D convolution.
struct PointwiseLinear {
  int out_channels = 0;
  int in_channels = 0;
  std::vector<double> weights;  // out_channels x in_channels, row-major
  std::vector<double> bias;     // empty for bias-free layers

  PointwiseLinear() = default;
  PointwiseLinear(int out, int in, bool with_bias);

  static PointwiseLinear identity(int n);
  // Uniform in [-1/sqrt(in), 1/sqrt(in)] for weights and bias.
  static PointwiseLinear random(int out, int in, bool with_bias, Rng& rng);

  bool has_bias() const { return !bias.empty(); }
  double& w(int o, int i) { return weights[static_cast<std::size_t>(o) * in_channels + i]; }
  double w(int o, int i) const { return weights[static_cast<std::size_t>(o) * in_channels + i]; }

  std::vector<double> apply_cell(std::span<const double> x) const;

  friend bool operator==(const PointwiseLinear&, const PointwiseLinear&) = default;
};

FeatureMap pointwise_apply(const PointwiseLinear& layer, const FeatureMap& map);

// Gradients of a pointwise layer (the "grad tape" for one application).
struct PointwiseGrads {
  std::vector<double> d_weights;  // shaped like layer.weights
  std::vector<double> d_bias;     // shaped like layer.bias
  FeatureMap d_input;             // shaped like the input map
};

PointwiseGrads pointwise_backward(const PointwiseLinear& layer,
                                  const FeatureMap& map,
                                  const FeatureMap& upstream_grad);

// Uniform-bin average pooling. The box is given in map coordinates where cell
// (r, c) covers [c, c + 1) x [r, r + 1). A cell contributes to the bin that
// contains its center; an empty bin copies the covered cell nearest to the
// bin center.
FeatureMap roi_pool(const FeatureMap& map, const BBox& box, int out_size = 5);

using ScalarFunction = std::function<double(std::span<const double>)>;

// Central differences (f(p + eps) - f(p - eps)) / (2 eps) for every entry.
std::vector<double> finite_diff_grad(const ScalarFunction& f,
                                     std::span<const double> params,
                                     double eps = 1e-4);

// ||a - b|| / max(||a||, ||b||); 0 when both vectors vanish.
double relative_error(std::span<const double> a, std::span<const double> b);

}  // namespace treg
