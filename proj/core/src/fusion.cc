#include "treg/fusion.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "treg/errors.h"

namespace treg {

FusionKind parse_fusion(std::string_view name) {
  if (name == "tat") return FusionKind::TargetAwareTransformer;
  if (name == "dwcorr") return FusionKind::DepthwiseCorrelation;
  if (name == "pcorr") return FusionKind::PixelCorrAttention;
  if (name == "none") return FusionKind::NoFusion;
  throw ConfigError("unknown fusion kind '" + std::string(name) +
                    "' (expected tat, dwcorr, pcorr or none)");
}

std::string fusion_name(FusionKind kind) {
  switch (kind) {
    case FusionKind::TargetAwareTransformer: return "tat";
    case FusionKind::DepthwiseCorrelation: return "dwcorr";
    case FusionKind::PixelCorrAttention: return "pcorr";
    case FusionKind::NoFusion: return "none";
  }
  return "none";
}

namespace fusion {

FeatureMap depthwise_correlation(const FeatureMap& search,
                                 const FeatureMap& templ) {
  if (search.channels() != templ.channels()) {
    throw ShapeError("depthwise_correlation: search " + search.shape_string() +
                     " vs template " + templ.shape_string());
  }
  if (templ.height() > search.height() || templ.width() > search.width()) {
    throw ShapeError("depthwise_correlation: template " + templ.shape_string() +
                     " larger than search " + search.shape_string());
  }
  const int kh = templ.height();
  const int kw = templ.width();
  const int vh = search.height() - kh + 1;
  const int vw = search.width() - kw + 1;
  FeatureMap out(search.channels(), search.height(), search.width());
  for (int c = 0; c < search.channels(); ++c) {
    for (int r = 0; r < vh; ++r) {
      for (int q = 0; q < vw; ++q) {
        double s = 0.0;
        for (int u = 0; u < kh; ++u) {
          for (int v = 0; v < kw; ++v) s += search.at(c, r + u, q + v) * templ.at(c, u, v);
        }
        out.at(c, r + kh / 2, q + kw / 2) = s;
      }
    }
  }
  return out;
}

FeatureMap pixel_corr_weights(const FeatureMap& search,
                              const attention::StackedTemplates& templates,
                              bool clamp) {
  if (templates.empty()) {
    throw PreconditionError("pixel_corr_attention needs at least one template");
  }
  if (templates.channels() != search.channels()) {
    throw ShapeError("pixel_corr_attention: search " + search.shape_string() +
                     " vs templates with " + std::to_string(templates.channels()) +
                     " channels");
  }
  const int channels = search.channels();
  // Unit-normalized template cells; zero cells stay zero.
  std::vector<std::vector<double>> keys;
  for (const FeatureMap& t : templates.entries()) {
    for (int r = 0; r < t.height(); ++r) {
      for (int q = 0; q < t.width(); ++q) {
        std::vector<double> k = t.cell(r, q);
        double n = 0.0;
        for (double v : k) n += v * v;
        n = std::sqrt(n);
        for (double& v : k) v = n > 0.0 ? v / n : 0.0;
        keys.push_back(std::move(k));
      }
    }
  }
  FeatureMap weights(1, search.height(), search.width());
  for (int r = 0; r < search.height(); ++r) {
    for (int q = 0; q < search.width(); ++q) {
      double n = 0.0;
      for (int c = 0; c < channels; ++c) n += search.at(c, r, q) * search.at(c, r, q);
      n = std::sqrt(n);
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& k : keys) {
        double s = 0.0;
        for (int c = 0; c < channels; ++c) s += search.at(c, r, q) * k[c];
        best = std::max(best, n > 0.0 ? s / n : 0.0);
      }
      best = std::clamp(best, -1.0, 1.0);
      weights.at(0, r, q) = clamp ? std::max(best, 0.0) : best;
    }
  }
  return weights;
}

FeatureMap pixel_corr_attention(const FeatureMap& search,
                                const attention::StackedTemplates& templates,
                                bool clamp) {
  const FeatureMap weights = pixel_corr_weights(search, templates, clamp);
  FeatureMap out = search;
  for (int c = 0; c < out.channels(); ++c) {
    std::span<double> ch = out.channel(c);
    for (int p = 0; p < out.plane_size(); ++p) ch[p] *= weights.data()[p];
  }
  return out;
}

FeatureMap pixel_corr_attention(const FeatureMap& search,
                                const FeatureMap& templ, bool clamp) {
  return pixel_corr_attention(search, attention::StackedTemplates({templ}), clamp);
}

FeatureMap apply(FusionKind kind, const FeatureMap& search,
                 const attention::StackedTemplates& templates,
                 const attention::AttentionParams& params,
                 const attention::TransformOptions& options) {
  switch (kind) {
    case FusionKind::TargetAwareTransformer:
      return attention::transform(search, templates, params, options);
    case FusionKind::DepthwiseCorrelation:
      if (templates.empty()) {
        throw PreconditionError("depthwise correlation needs a template");
      }
      return depthwise_correlation(search, templates.entry(0));
    case FusionKind::PixelCorrAttention:
      return pixel_corr_attention(search, templates);
    case FusionKind::NoFusion:
      return search;
  }
  return search;
}

}  // namespace fusion
}  // namespace treg
