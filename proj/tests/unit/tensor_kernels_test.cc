#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.h"
#include "treg/errors.h"
#include "treg/regression_head.h"
#include "treg/tensor_kernels.h"

namespace treg {
namespace {

using testing::random_layer;
using testing::random_map;

TEST(PointwiseApply, IdentityLeavesInputUnchanged) {
  Rng rng(1);
  const FeatureMap x = random_map(rng, 5, 3, 4);
  EXPECT_EQ(pointwise_apply(PointwiseLinear::identity(5), x), x);
}

TEST(PointwiseApply, ZeroWeightsGiveZeroMap) {
  Rng rng(2);
  const FeatureMap x = random_map(rng, 3, 4, 4);
  const FeatureMap y = pointwise_apply(PointwiseLinear(6, 3, false), x);
  EXPECT_EQ(y.channels(), 6);
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(PointwiseApply, MatchesTripleLoop) {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const FeatureMap x = random_map(rng, 3, 2, 2);
    const PointwiseLinear layer = random_layer(rng, 4, 3, trial % 2 == 0);
    const FeatureMap got = pointwise_apply(layer, x);
    const FeatureMap want = testing::ref_pointwise(layer, x);
    EXPECT_LT(relative_error(got.data(), want.data()), 1e-12);
  }
}

TEST(PointwiseApply, ChannelMismatchNamesBothShapes) {
  const PointwiseLinear layer(2, 3, false);
  const FeatureMap x(4, 2, 2);
  try {
    pointwise_apply(layer, x);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("4x2x2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
  }
}

TEST(PointwiseApply, LinearForBiasFreeLayers) {
  Rng rng(4);
  const PointwiseLinear layer = random_layer(rng, 5, 4, false);
  const FeatureMap m1 = random_map(rng, 4, 3, 3);
  const FeatureMap m2 = random_map(rng, 4, 3, 3);
  const double a = 1.7;
  const double b = -0.4;
  const FeatureMap lhs = pointwise_apply(layer, axpby(a, m1, b, m2));
  const FeatureMap rhs = axpby(a, pointwise_apply(layer, m1), b, pointwise_apply(layer, m2));
  EXPECT_LT(relative_error(lhs.data(), rhs.data()), 1e-9);
}

TEST(PointwiseBackward, ZeroUpstreamGivesZeroGradients) {
  Rng rng(5);
  const PointwiseLinear layer = random_layer(rng, 3, 2, true);
  const FeatureMap x = random_map(rng, 2, 3, 3);
  const PointwiseGrads g = pointwise_backward(layer, x, FeatureMap(3, 3, 3));
  for (double v : g.d_weights) EXPECT_EQ(v, 0.0);
  for (double v : g.d_bias) EXPECT_EQ(v, 0.0);
  for (double v : g.d_input.data()) EXPECT_EQ(v, 0.0);
}

TEST(PointwiseBackward, IdentityPassesOnes) {
  Rng rng(6);
  const FeatureMap x = random_map(rng, 1, 4, 4);
  const PointwiseGrads g =
      pointwise_backward(PointwiseLinear::identity(1), x, FeatureMap(1, 4, 4, 1.0));
  for (double v : g.d_input.data()) EXPECT_EQ(v, 1.0);
}

TEST(PointwiseBackward, ShapeMismatchThrows) {
  const PointwiseLinear layer(3, 2, false);
  EXPECT_THROW(pointwise_backward(layer, FeatureMap(2, 3, 3), FeatureMap(3, 2, 3)), ShapeError);
}

TEST(PointwiseBackward, AdjointOfForward) {
  Rng rng(7);
  const PointwiseLinear layer = random_layer(rng, 4, 6, false);
  const FeatureMap v = random_map(rng, 6, 3, 5);
  const FeatureMap u = random_map(rng, 4, 3, 5);
  const double lhs = dot(u, pointwise_apply(layer, v));
  const double rhs = dot(pointwise_backward(layer, v, u).d_input, v);
  EXPECT_NEAR(lhs, rhs, 1e-9 * std::abs(lhs));
}

TEST(PointwiseBackward, MatchesFiniteDifferences) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    PointwiseLinear layer = random_layer(rng, 3, 4, true);
    const FeatureMap x = random_map(rng, 4, 3, 3);
    const FeatureMap up = random_map(rng, 3, 3, 3);
    const PointwiseGrads g = pointwise_backward(layer, x, up);

    std::vector<double> params = layer.weights;
    params.insert(params.end(), layer.bias.begin(), layer.bias.end());
    params.insert(params.end(), x.data().begin(), x.data().end());
    const std::size_t nw = layer.weights.size();
    const std::size_t nb = layer.bias.size();
    auto f = [&](std::span<const double> p) {
      PointwiseLinear l = layer;
      std::copy(p.begin(), p.begin() + nw, l.weights.begin());
      std::copy(p.begin() + nw, p.begin() + nw + nb, l.bias.begin());
      FeatureMap xi = x;
      std::copy(p.begin() + nw + nb, p.end(), xi.data().begin());
      return dot(up, pointwise_apply(l, xi));
    };
    std::vector<double> analytic = g.d_weights;
    analytic.insert(analytic.end(), g.d_bias.begin(), g.d_bias.end());
    analytic.insert(analytic.end(), g.d_input.data().begin(), g.d_input.data().end());
    EXPECT_LT(relative_error(analytic, finite_diff_grad(f, params)), 1e-4) << "trial " << trial;
  }
}

TEST(RoiPool, ConstantMapGivesConstantPatch) {
  FeatureMap m(2, 8, 8);
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) {
      m.at(0, r, c) = 3.5;
      m.at(1, r, c) = -1.25;
    }
  }
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const BBox box{rng.uniform(1.0, 7.0), rng.uniform(1.0, 7.0), rng.uniform(0.5, 6.0),
                   rng.uniform(0.5, 6.0)};
    const FeatureMap p = roi_pool(m, box);
    ASSERT_EQ(p.height(), 5);
    for (int r = 0; r < 5; ++r) {
      for (int c = 0; c < 5; ++c) {
        EXPECT_EQ(p.at(0, r, c), 3.5);
        EXPECT_EQ(p.at(1, r, c), -1.25);
      }
    }
  }
}

TEST(RoiPool, SingleCellBoxReplicatesThatCell) {
  Rng rng(10);
  const FeatureMap m = random_map(rng, 3, 6, 6);
  const FeatureMap p = roi_pool(m, BBox::from_corners(2.0, 3.0, 3.0, 4.0));
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 5; ++c) {
      for (int ch = 0; ch < 3; ++ch) EXPECT_EQ(p.at(ch, r, c), m.at(ch, 3, 2));
    }
  }
}

TEST(RoiPool, MatchesBinEnumeration) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const FeatureMap m = random_map(rng, 2, 8, 8);
    const int x0 = rng.uniform_int(0, 2);
    const int y0 = rng.uniform_int(0, 2);
    const BBox box = BBox::from_corners(x0, y0, x0 + 6.0, y0 + 6.0);
    const FeatureMap got = roi_pool(m, box);
    const FeatureMap want = testing::ref_roi_pool(m, box, 5);
    ASSERT_TRUE(want.all_finite());
    EXPECT_LT(relative_error(got.data(), want.data()), 1e-12);
  }
}

TEST(RoiPool, BoxOutsideMapThrows) {
  const FeatureMap m(1, 4, 4);
  EXPECT_THROW(roi_pool(m, BBox{10.0, 10.0, 2.0, 2.0}), OutOfBoundsError);
  EXPECT_THROW(roi_pool(m, BBox{-3.0, 2.0, 2.0, 2.0}), OutOfBoundsError);
}

TEST(FiniteDiffGrad, LinearFunctionGivesOnes) {
  const std::vector<double> p{0.3, -1.0, 2.5};
  auto f = [](std::span<const double> x) { return std::accumulate(x.begin(), x.end(), 0.0); };
  for (double g : finite_diff_grad(f, p)) EXPECT_NEAR(g, 1.0, 1e-9);
}

TEST(FiniteDiffGrad, QuadraticGivesTwiceParams) {
  const std::vector<double> p{0.3, -1.0, 2.5, 0.0};
  auto f = [](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
  };
  const std::vector<double> g = finite_diff_grad(f, p);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(g[i], 2.0 * p[i], 1e-8);
}

TEST(FiniteDiffGrad, NonFiniteValueNamesEntry) {
  const std::vector<double> p{1.0, 5e-5};
  auto f = [](std::span<const double> x) { return std::log(x[1]); };
  try {
    finite_diff_grad(f, p);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("entry 1"), std::string::npos) << e.what();
  }
}

TEST(FiniteDiffGrad, IouLossAgreesWithAnalyticBackward) {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const Point p{rng.uniform(30.0, 50.0), rng.uniform(30.0, 50.0)};
    const BBox gt{rng.uniform(35.0, 45.0), rng.uniform(35.0, 45.0), rng.uniform(15.0, 30.0),
                  rng.uniform(15.0, 30.0)};
    const std::vector<double> offs{rng.uniform(5.0, 20.0), rng.uniform(5.0, 20.0),
                                   rng.uniform(5.0, 20.0), rng.uniform(5.0, 20.0)};
    auto f = [&](std::span<const double> o) {
      return head::iou_loss(head::Offsets{o[0], o[1], o[2], o[3]}, p, gt).loss;
    };
    const head::IouLossResult res =
        head::iou_loss(head::Offsets{offs[0], offs[1], offs[2], offs[3]}, p, gt);
    if (res.iou <= 0.0) continue;
    const std::vector<double> analytic(res.d_offsets.begin(), res.d_offsets.end());
    EXPECT_LT(relative_error(analytic, finite_diff_grad(f, offs, 1e-5)), 1e-3);
  }
}

}  // namespace
}  // namespace treg
