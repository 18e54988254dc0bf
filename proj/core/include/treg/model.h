#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "treg/checkpoint.h"
#include "treg/features.h"
#include "treg/fusion.h"
#include "treg/regression_head.h"
#include "treg/target_attention.h"
#include "treg/tensor_kernels.h"

namespace treg {

struct ModelShape {
  int channels = 0;      // feature channels C
  int embed = 0;         // attention width D
  int hidden = 32;       // regression head width
  int cls_channels = 8;  // classification feature width

  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

// Every learnable tensor of the tracker plus the wiring flags needed to use
// them. Also serves as the gradient / optimizer-moment container, since it
// has the same layout.
struct ModelParams {
  FusionKind fusion = FusionKind::TargetAwareTransformer;
  bool tat_cls = false;  // attention on the classification feature as well
  bool average_residual = false;  // (W(.) + x) / 2 instead of W(.) + x
  FeatureConfig features;
  ModelShape shape;

  attention::AttentionParams attention;
  head::HeadParams head;
  PointwiseLinear cls;                                  // C -> cls_channels
  std::optional<attention::AttentionParams> cls_attention;

  static ModelParams init(const FeatureConfig& features, FusionKind fusion,
                          bool tat_cls, std::uint64_t seed, int hidden = 32,
                          int cls_channels = 8);

  // Same layout, all entries zero.
  ModelParams zeros_like() const;

  struct Tensor {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::span<double> values;
  };
  struct ConstTensor {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::span<const double> values;
  };
  // Learnable tensors in a fixed order. Attention tensors are always listed;
  // whether they are used depends on the fusion kind.
  std::vector<Tensor> tensors();
  std::vector<ConstTensor> tensors() const;
  std::size_t parameter_count() const;

  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);

  Checkpoint to_checkpoint() const;
  static ModelParams from_checkpoint(const Checkpoint& ckpt);
  void save(const std::filesystem::path& path) const;
  static ModelParams load(const std::filesystem::path& path);

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Feature fed to the regression head: the configured fusion of the search
// feature with the template stack.
FeatureMap regression_features(const ModelParams& params, const FeatureMap& search,
                               const attention::StackedTemplates& templates);

// Input of the classification layer: the search feature, or its attention
// transform when tat_cls is set.
FeatureMap classification_base(const ModelParams& params, const FeatureMap& search,
                               const attention::StackedTemplates& templates);

// Classification feature: the learned pointwise layer over classification_base.
FeatureMap classification_features(const ModelParams& params, const FeatureMap& search,
                                   const attention::StackedTemplates& templates);

}  // namespace treg
