#pragma once

#include <span>
#include <vector>

#include "treg/feature_map.h"
#include "treg/random.h"
#include "treg/tensor_kernels.h"

namespace treg::attention {

// Encoders of the target-aware transformer. theta encodes search cells as
// queries, phi and omega encode template cells as keys and values, w_out maps
// the aggregated value back to the search channel count. All bias-free.
struct AttentionParams {
  PointwiseLinear theta;  // C -> D
  PointwiseLinear phi;    // C -> D
  PointwiseLinear omega;  // C -> D
  PointwiseLinear w_out;  // D -> C

  static AttentionParams random(int channels, int embed, Rng& rng);
  static AttentionParams zeros(int channels, int embed);

  int channels() const { return theta.in_channels; }
  int embed() const { return theta.out_channels; }

  // Throws ShapeError if the encoders do not compose.
  void validate() const;

  friend bool operator==(const AttentionParams&, const AttentionParams&) = default;
};

// D = C / 2 with a floor of 8.
int default_embed_width(int channels);

// The template queue flattened for attention: t entries of C x h x w.
// N = t * h * w is the normalizer of the aggregation.
class StackedTemplates {
 public:
  StackedTemplates() = default;
  explicit StackedTemplates(std::vector<FeatureMap> entries);

  int count() const { return static_cast<int>(entries_.size()); }
  int channels() const { return entries_.empty() ? 0 : entries_[0].channels(); }
  int height() const { return entries_.empty() ? 0 : entries_[0].height(); }
  int width() const { return entries_.empty() ? 0 : entries_[0].width(); }
  int cells() const { return cells_; }
  bool empty() const { return entries_.empty(); }
  const std::vector<FeatureMap>& entries() const { return entries_; }
  const FeatureMap& entry(int k) const { return entries_[k]; }

 private:
  std::vector<FeatureMap> entries_;
  int cells_ = 0;
};

struct TransformOptions {
  // y = (W(.) + x) / 2 instead of W(.) + x.
  bool average_residual = false;
};

// A(t, x) = theta(x)^T phi(t) for one query cell and one key cell.
double affinity(std::span<const double> query_cell,
                std::span<const double> key_cell,
                const AttentionParams& params);

// y_i = W((1/N) sum_k sum_{j in template k} A(t_j, x_i) omega(t_j)) + x_i.
FeatureMap transform(const FeatureMap& search, const StackedTemplates& templates,
                     const AttentionParams& params,
                     const TransformOptions& options = {});

struct AttentionGrads {
  std::vector<double> d_theta;
  std::vector<double> d_phi;
  std::vector<double> d_omega;
  std::vector<double> d_w_out;
  FeatureMap d_search;
  std::vector<FeatureMap> d_templates;
};

AttentionGrads transform_backward(const FeatureMap& search,
                                  const StackedTemplates& templates,
                                  const AttentionParams& params,
                                  const FeatureMap& upstream_grad,
                                  const TransformOptions& options = {});

// Single-channel map of (1/N) sum of affinities at every search position.
FeatureMap attention_map(const FeatureMap& search,
                         const StackedTemplates& templates,
                         const AttentionParams& params);

}  // namespace treg::attention
