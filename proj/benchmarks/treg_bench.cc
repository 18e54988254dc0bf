#include <benchmark/benchmark.h>

#include <vector>

#include "treg/classifier.h"
#include "treg/features.h"
#include "treg/regression_head.h"
#include "treg/target_attention.h"
#include "treg/tensor_kernels.h"

namespace {

using namespace treg;

FeatureMap random_map(Rng& rng, int c, int h, int w) {
  FeatureMap m(c, h, w);
  for (double& v : m.data()) v = rng.uniform(-1.0, 1.0);
  return m;
}

// Search grid and channel count of the default feature configuration.
constexpr int kGrid = 24;
constexpr int kChannels = 51;

void BM_Transform(benchmark::State& state) {
  Rng rng(1);
  const int templates = static_cast<int>(state.range(0));
  const auto p = attention::AttentionParams::random(
      kChannels, attention::default_embed_width(kChannels), rng);
  const FeatureMap x = random_map(rng, kChannels, kGrid, kGrid);
  std::vector<FeatureMap> entries;
  for (int i = 0; i < templates; ++i) entries.push_back(random_map(rng, kChannels, 5, 5));
  const attention::StackedTemplates t(std::move(entries));
  for (auto _ : state) benchmark::DoNotOptimize(attention::transform(x, t, p));
}
BENCHMARK(BM_Transform)->Arg(1)->Arg(3)->Arg(7);

void BM_TransformBackward(benchmark::State& state) {
  Rng rng(2);
  const auto p = attention::AttentionParams::random(
      kChannels, attention::default_embed_width(kChannels), rng);
  const FeatureMap x = random_map(rng, kChannels, kGrid, kGrid);
  std::vector<FeatureMap> entries;
  for (int i = 0; i < 3; ++i) entries.push_back(random_map(rng, kChannels, 5, 5));
  const attention::StackedTemplates t(std::move(entries));
  const FeatureMap up = random_map(rng, kChannels, kGrid, kGrid);
  for (auto _ : state) benchmark::DoNotOptimize(attention::transform_backward(x, t, p, up));
}
BENCHMARK(BM_TransformBackward);

void BM_HeadForward(benchmark::State& state) {
  Rng rng(3);
  const auto p = head::HeadParams::random(kChannels, 32, rng);
  const FeatureMap x = random_map(rng, kChannels, kGrid, kGrid);
  for (auto _ : state) benchmark::DoNotOptimize(head::predict_offsets(x, p));
}
BENCHMARK(BM_HeadForward);

void BM_RoiPool(benchmark::State& state) {
  Rng rng(4);
  const FeatureMap x = random_map(rng, kChannels, kGrid, kGrid);
  const BBox box{12.0, 12.0, 6.0, 6.0};
  for (auto _ : state) benchmark::DoNotOptimize(roi_pool(x, box, 5));
}
BENCHMARK(BM_RoiPool);

void BM_Correlate(benchmark::State& state) {
  Rng rng(5);
  const FeatureMap f = random_map(rng, 8, kGrid, kGrid);
  const FeatureMap w = random_map(rng, 8, 5, 5);
  for (auto _ : state) benchmark::DoNotOptimize(classifier::correlate(w, f));
}
BENCHMARK(BM_Correlate);

void BM_FitFilter(benchmark::State& state) {
  Rng rng(6);
  std::vector<classifier::FilterSample> samples;
  for (int i = 0; i < 15; ++i) {
    samples.push_back({random_map(rng, 8, kGrid, kGrid),
                       classifier::gaussian_label({12, 12}, 0.75, kGrid, kGrid)});
  }
  classifier::FitOptions opt;
  opt.iterations = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(classifier::fit_filter(samples, 0.1, opt));
}
BENCHMARK(BM_FitFilter)->Arg(10)->Arg(50);

void BM_ExtractFeatures(benchmark::State& state) {
  Rng rng(7);
  const FeatureConfig cfg;
  const Image crop = random_map(rng, 1, cfg.crop_px, cfg.crop_px);
  for (auto _ : state) benchmark::DoNotOptimize(extract_features(crop, cfg));
}
BENCHMARK(BM_ExtractFeatures);

}  // namespace
BENCHMARK_MAIN();
