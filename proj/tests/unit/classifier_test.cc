#include <gtest/gtest.h>

#include <cmath>

#include "oracles.h"
#include "treg/classifier.h"
#include "treg/errors.h"

namespace treg::classifier {
namespace {

using treg::testing::random_map;

TEST(GaussianLabel, PeakAndFalloff) {
  const FeatureMap y = gaussian_label({5, 5}, 2.0, 11, 11);
  EXPECT_EQ(y.at(0, 5, 5), 1.0);
  EXPECT_NEAR(y.at(0, 5, 7), std::exp(-0.5), 1e-15);
  EXPECT_NEAR(y.at(0, 3, 5), std::exp(-0.5), 1e-15);
  for (int d = 0; d < 5; ++d) EXPECT_GT(y.at(0, 5, 5 + d), y.at(0, 5, 6 + d));
  EXPECT_THROW(gaussian_label({0, 0}, 0.0, 3, 3), PreconditionError);
}

TEST(GaussianLabel, FractionalCenterMatchesIntegerCenter) {
  EXPECT_EQ(gaussian_label_at(4.0, 6.0, 1.5, 9, 9), gaussian_label({4, 6}, 1.5, 9, 9));
}

TEST(ArgmaxPosition, TiesGoToFirstRowThenColumn) {
  FeatureMap s(1, 4, 4);
  s.at(0, 2, 3) = 1.0;
  s.at(0, 2, 1) = 1.0;
  s.at(0, 3, 0) = 1.0;
  EXPECT_EQ(argmax_position(s), (GridPos{2, 1}));
  EXPECT_THROW(argmax_position(FeatureMap()), PreconditionError);
}

TEST(Correlate, MatchesSlidingWindowOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const FeatureMap f = random_map(rng, 3, 9, 8);
    const FeatureMap w = random_map(rng, 3, 5, 5);
    EXPECT_LT(relative_error(correlate(w, f).data(), treg::testing::ref_correlate(w, f).data()),
              1e-12);
  }
}

TEST(Correlate, ShapeErrors) {
  EXPECT_THROW(correlate(FeatureMap(2, 3, 3), FeatureMap(3, 8, 8)), ShapeError);
  EXPECT_THROW(correlate(FeatureMap(2, 9, 9), FeatureMap(2, 8, 8)), ShapeError);
}

TEST(Correlate, BackwardPassesAreAdjoints) {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const FeatureMap f = random_map(rng, 2, 8, 7);
    const FeatureMap w = random_map(rng, 2, 3, 3);
    const FeatureMap g = random_map(rng, 1, 8, 7);
    const double lhs = dot(g, correlate(w, f));
    EXPECT_NEAR(dot(correlate_backward_feature(w, g, 8, 7), f), lhs, 1e-10);
    EXPECT_NEAR(dot(correlate_backward_filter(f, g, 3, 3), w), lhs, 1e-10);
  }
}

TEST(Score, ZeroFilterGivesZeroMap) {
  Rng rng(3);
  OnlineFilter filter{FeatureMap(4, 5, 5), 0.1, 1.0};
  const FeatureMap s = score(filter, random_map(rng, 4, 12, 12));
  for (double v : s.data()) EXPECT_EQ(v, 0.0);
}

TEST(FitFilter, RecoversPlantedFilter) {
  Rng rng(4);
  const FeatureMap planted = random_map(rng, 2, 3, 3);
  std::vector<FilterSample> samples;
  for (int i = 0; i < 3; ++i) {
    FeatureMap f = random_map(rng, 2, 10, 10);
    samples.push_back({f, correlate(planted, f)});
  }
  FitOptions opts;
  opts.kernel = 3;
  opts.iterations = 60;
  const OnlineFilter fit = fit_filter(samples, 1e-9, opts);
  EXPECT_LT(relative_error(fit.weights.data(), planted.data()), 1e-3);
  EXPECT_LT(filter_objective(fit.weights, samples, 1e-9), 1e-6);
}

TEST(FitFilter, ObjectiveTraceIsMonotone) {
  Rng rng(5);
  std::vector<FilterSample> samples;
  for (int i = 0; i < 2; ++i) {
    samples.push_back({random_map(rng, 4, 12, 12), gaussian_label({6, 6}, 1.0, 12, 12)});
  }
  std::vector<double> trace;
  FitOptions opts;
  opts.iterations = 20;
  const OnlineFilter fit = fit_filter(samples, 0.05, opts, &trace);
  ASSERT_EQ(trace.size(), 21u);
  for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_LE(trace[i], trace[i - 1] + 1e-12) << i;
  EXPECT_NEAR(trace.back(), filter_objective(fit.weights, samples, 0.05), 1e-9);
  EXPECT_LT(trace.back(), trace.front());
}

TEST(FitFilter, LargeRegularizationShrinksToZero) {
  Rng rng(6);
  std::vector<FilterSample> samples{
      {random_map(rng, 3, 10, 10), gaussian_label({5, 5}, 1.0, 10, 10)}};
  FitOptions opts;
  opts.kernel = 3;
  const OnlineFilter small = fit_filter(samples, 1e-3, opts);
  const OnlineFilter big = fit_filter(samples, 1e6, opts);
  double n_small = 0.0, n_big = 0.0;
  for (double v : small.weights.data()) n_small += v * v;
  for (double v : big.weights.data()) n_big += v * v;
  EXPECT_LT(std::sqrt(n_big), 1e-4 * std::sqrt(n_small));
}

TEST(FitFilter, Deterministic) {
  Rng rng(7);
  std::vector<FilterSample> samples{
      {random_map(rng, 3, 10, 10), gaussian_label({4, 5}, 1.0, 10, 10)}};
  EXPECT_EQ(fit_filter(samples, 0.1).weights, fit_filter(samples, 0.1).weights);
}

TEST(FitFilter, WarmStartAtOptimumStaysThere) {
  Rng rng(8);
  std::vector<FilterSample> samples{
      {random_map(rng, 2, 9, 9), gaussian_label({4, 4}, 1.0, 9, 9)}};
  FitOptions opts;
  opts.kernel = 3;
  opts.iterations = 100;
  const OnlineFilter a = fit_filter(samples, 0.1, opts);
  opts.iterations = 5;
  const OnlineFilter b = fit_filter(samples, 0.1, opts, nullptr, &a.weights);
  EXPECT_LT(relative_error(a.weights.data(), b.weights.data()), 1e-6);
}

TEST(FitFilter, ErrorPaths) {
  EXPECT_THROW(fit_filter({}, 0.1), PreconditionError);
  std::vector<FilterSample> samples{{FeatureMap(2, 8, 8), FeatureMap(1, 8, 8)}};
  EXPECT_THROW(fit_filter(samples, 0.0), PreconditionError);
  samples.push_back({FeatureMap(3, 8, 8), FeatureMap(1, 8, 8)});
  EXPECT_THROW(fit_filter(samples, 0.1), ShapeError);
}

TEST(FitFilter, PeaksAtTheLabelCenter) {
  Rng rng(9);
  std::vector<FilterSample> samples{
      {random_map(rng, 8, 16, 16), gaussian_label({7, 9}, 1.0, 16, 16)}};
  const OnlineFilter fit = fit_filter(samples, 1e-3);
  EXPECT_EQ(locate(score(fit, samples[0].feature)).pos, (GridPos{7, 9}));
}

TEST(Locate, DeltaMap) {
  FeatureMap s(1, 6, 6);
  s.at(0, 4, 1) = 3.6;
  const Location loc = locate(s);
  EXPECT_EQ(loc.pos, (GridPos{4, 1}));
  EXPECT_NEAR(loc.confidence, logistic(3.6 - 0.1), 1e-12);
}

TEST(Locate, ConstantMapIsUndecided) {
  const Location loc = locate(FeatureMap(1, 5, 5, 2.0));
  EXPECT_EQ(loc.pos, (GridPos{0, 0}));
  EXPECT_EQ(loc.confidence, 0.5);
}

TEST(Locate, InvariantToAdditiveShift) {
  Rng rng(10);
  const FeatureMap s = random_map(rng, 1, 7, 7);
  FeatureMap t = s;
  for (double& v : t.data()) v += 5.0;
  EXPECT_EQ(locate(s).pos, locate(t).pos);
  EXPECT_NEAR(locate(s).confidence, locate(t).confidence, 1e-12);
}

TEST(Logistic, Values) {
  EXPECT_EQ(logistic(0.0), 0.5);
  EXPECT_NEAR(logistic(2.0) + logistic(-2.0), 1.0, 1e-15);
  EXPECT_EQ(logistic(-1000.0), 0.0);
  EXPECT_EQ(logistic(1000.0), 1.0);
}

}  // namespace
}  // namespace treg::classifier
