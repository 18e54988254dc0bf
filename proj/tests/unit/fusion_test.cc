#include <gtest/gtest.h>

#include <cmath>

#include "oracles.h"
#include "treg/errors.h"
#include "treg/fusion.h"

namespace treg {
namespace {

using testing::random_map;
using testing::random_templates;

TEST(FusionNames, RoundTrip) {
  for (FusionKind k : {FusionKind::TargetAwareTransformer, FusionKind::DepthwiseCorrelation,
                       FusionKind::PixelCorrAttention, FusionKind::NoFusion}) {
    EXPECT_EQ(parse_fusion(fusion_name(k)), k);
  }
  EXPECT_EQ(fusion_name(FusionKind::TargetAwareTransformer), "tat");
  EXPECT_THROW(parse_fusion("softmax"), ConfigError);
}

TEST(DepthwiseCorrelation, DeltaKernelReturnsSearch) {
  Rng rng(1);
  const FeatureMap x = random_map(rng, 1, 5, 6);
  EXPECT_EQ(fusion::depthwise_correlation(x, FeatureMap(1, 1, 1, 1.0)), x);
}

TEST(DepthwiseCorrelation, ConstantSearchGivesConstantValidResponse) {
  FeatureMap x(2, 7, 7);
  for (int r = 0; r < 7; ++r) {
    for (int c = 0; c < 7; ++c) {
      x.at(0, r, c) = 2.0;
      x.at(1, r, c) = -0.5;
    }
  }
  Rng rng(2);
  const FeatureMap t = random_map(rng, 2, 3, 3);
  const FeatureMap y = fusion::depthwise_correlation(x, t);
  for (int ch = 0; ch < 2; ++ch) {
    const double v = y.at(ch, 1, 1);
    for (int r = 1; r < 6; ++r) {
      for (int c = 1; c < 6; ++c) EXPECT_NEAR(y.at(ch, r, c), v, 1e-12);
    }
  }
}

TEST(DepthwiseCorrelation, MatchesSlidingWindow) {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const FeatureMap x = random_map(rng, 4, 6, 6);
    const FeatureMap t = random_map(rng, 4, 3, 3);
    EXPECT_LT(relative_error(fusion::depthwise_correlation(x, t).data(),
                             testing::ref_depthwise(x, t).data()),
              1e-12);
  }
}

TEST(DepthwiseCorrelation, TranslationEquivariant) {
  Rng rng(4);
  const FeatureMap x = random_map(rng, 2, 9, 9);
  const FeatureMap t = random_map(rng, 2, 3, 3);
  // Shift the content one cell right and two cells down.
  FeatureMap shifted(2, 9, 9);
  for (int ch = 0; ch < 2; ++ch) {
    for (int r = 2; r < 9; ++r) {
      for (int c = 1; c < 9; ++c) shifted.at(ch, r, c) = x.at(ch, r - 2, c - 1);
    }
  }
  const FeatureMap a = fusion::depthwise_correlation(x, t);
  const FeatureMap b = fusion::depthwise_correlation(shifted, t);
  for (int ch = 0; ch < 2; ++ch) {
    for (int r = 3; r < 8; ++r) {
      for (int c = 2; c < 8; ++c) EXPECT_NEAR(b.at(ch, r, c), a.at(ch, r - 2, c - 1), 1e-12);
    }
  }
}

TEST(DepthwiseCorrelation, ErrorPaths) {
  EXPECT_THROW(fusion::depthwise_correlation(FeatureMap(2, 3, 3), FeatureMap(2, 4, 4)), ShapeError);
  EXPECT_THROW(fusion::depthwise_correlation(FeatureMap(2, 5, 5), FeatureMap(3, 3, 3)), ShapeError);
}

TEST(PixelCorr, SelfMatchGivesWeightOne) {
  Rng rng(5);
  const FeatureMap x = random_map(rng, 4, 6, 6);
  const FeatureMap t = x.crop(1, 2, 3, 3);
  const FeatureMap w = fusion::pixel_corr_weights(x, attention::StackedTemplates({t}));
  for (int r = 1; r < 4; ++r) {
    for (int c = 2; c < 5; ++c) EXPECT_NEAR(w.at(0, r, c), 1.0, 1e-12);
  }
}

TEST(PixelCorr, OrthogonalCellIsZeroed) {
  FeatureMap x(3, 2, 2);
  x.at(0, 0, 0) = 1.0;  // aligned with the template
  x.at(2, 1, 1) = 4.0;  // orthogonal to every template cell
  x.at(1, 0, 1) = 1.0;
  FeatureMap t(3, 1, 2);
  t.at(0, 0, 0) = 2.0;
  t.at(1, 0, 1) = 1.0;
  const FeatureMap y = fusion::pixel_corr_attention(x, t);
  for (int ch = 0; ch < 3; ++ch) EXPECT_EQ(y.at(ch, 1, 1), 0.0);
  EXPECT_NEAR(y.at(0, 0, 0), 1.0, 1e-12);
}

TEST(PixelCorr, MatchesAllPairsOracle) {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const FeatureMap x = random_map(rng, 5, 6, 7);
    const attention::StackedTemplates t = random_templates(rng, 3, 5, 3);
    const FeatureMap w = fusion::pixel_corr_weights(x, t);
    EXPECT_LT(relative_error(w.data(), testing::ref_pixel_corr_weights(x, t).data()), 1e-12);
    const FeatureMap y = fusion::pixel_corr_attention(x, t);
    for (int ch = 0; ch < 5; ++ch) {
      for (int r = 0; r < 6; ++r) {
        for (int c = 0; c < 7; ++c) EXPECT_NEAR(y.at(ch, r, c), w.at(0, r, c) * x.at(ch, r, c), 1e-12);
      }
    }
  }
}

TEST(PixelCorr, WeightsBounded) {
  Rng rng(7);
  const FeatureMap x = random_map(rng, 3, 8, 8);
  const attention::StackedTemplates t = random_templates(rng, 2, 3, 2);
  const FeatureMap raw = fusion::pixel_corr_weights(x, t, false);
  for (double v : raw.data()) {
    EXPECT_GE(v, -1.0 - 1e-12);
    EXPECT_LE(v, 1.0 + 1e-12);
  }
  const FeatureMap clamped = fusion::pixel_corr_weights(x, t, true);
  for (double v : clamped.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0 + 1e-12);
  }
}

TEST(PixelCorr, ChannelMismatchThrows) {
  EXPECT_THROW(fusion::pixel_corr_attention(FeatureMap(3, 4, 4), FeatureMap(2, 2, 2)), ShapeError);
}

TEST(FusionApply, EveryKindPreservesShape) {
  Rng rng(8);
  const int c = 6;
  const attention::AttentionParams p = attention::AttentionParams::random(c, 8, rng);
  const FeatureMap x = random_map(rng, c, 9, 9);
  const attention::StackedTemplates t = random_templates(rng, 3, c, 5);
  for (FusionKind k : {FusionKind::TargetAwareTransformer, FusionKind::DepthwiseCorrelation,
                       FusionKind::PixelCorrAttention, FusionKind::NoFusion}) {
    EXPECT_TRUE(fusion::apply(k, x, t, p).same_shape(x)) << fusion_name(k);
  }
  EXPECT_EQ(fusion::apply(FusionKind::NoFusion, x, t, p), x);
}

TEST(FusionApply, DepthwiseUsesFirstEntryOnly) {
  Rng rng(9);
  const attention::AttentionParams p = attention::AttentionParams::random(4, 8, rng);
  const FeatureMap x = random_map(rng, 4, 9, 9);
  const attention::StackedTemplates t = random_templates(rng, 3, 4, 5);
  EXPECT_EQ(fusion::apply(FusionKind::DepthwiseCorrelation, x, t, p),
            fusion::depthwise_correlation(x, t.entry(0)));
}

}  // namespace
}  // namespace treg
