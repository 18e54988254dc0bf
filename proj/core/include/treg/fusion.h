#pragma once

#include <string>
#include <string_view>

#include "treg/feature_map.h"
#include "treg/target_attention.h"

namespace treg {

// How template information is fused into the regression feature.
enum class FusionKind {
  TargetAwareTransformer,  // "tat"
  DepthwiseCorrelation,    // "dwcorr"
  PixelCorrAttention,      // "pcorr"
  NoFusion,                // "none"
};

FusionKind parse_fusion(std::string_view name);
std::string fusion_name(FusionKind kind);

namespace fusion {

// Per-channel valid cross-correlation, written back centered into a zero map
// of the search size: valid output (r, c) lands at (r + kh/2, c + kw/2).
FeatureMap depthwise_correlation(const FeatureMap& search,
                                 const FeatureMap& templ);

// Spatial weights max_j cos(x_i, t_j) over every template cell, optionally
// clamped at zero. Zero vectors have cosine 0 with everything.
FeatureMap pixel_corr_weights(const FeatureMap& search,
                              const attention::StackedTemplates& templates,
                              bool clamp = true);

// Search features scaled by pixel_corr_weights.
FeatureMap pixel_corr_attention(const FeatureMap& search,
                                const attention::StackedTemplates& templates,
                                bool clamp = true);
FeatureMap pixel_corr_attention(const FeatureMap& search,
                                const FeatureMap& templ, bool clamp = true);

// Runs the selected fusion. DW-Corr uses the first queue entry only.
FeatureMap apply(FusionKind kind, const FeatureMap& search,
                 const attention::StackedTemplates& templates,
                 const attention::AttentionParams& params,
                 const attention::TransformOptions& options = {});

}  // namespace fusion
}  // namespace treg
