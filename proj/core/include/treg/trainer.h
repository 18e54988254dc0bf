#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "treg/model.h"
#include "treg/random.h"
#include "treg/regression_head.h"
#include "treg/synthetic.h"
#include "treg/target_attention.h"

namespace treg {

struct TrainConfig {
  int iterations = 2000;
  int batch_size = 8;
  double learning_rate = 6e-3;
  std::vector<double> milestones = {0.5, 0.75};  // fractions of the run
  double decay = 0.2;
  double cls_weight = 1.0;
  double reg_weight = 1.0;
  std::uint64_t seed = 1;

  int max_gap = 10;            // frames between template and search
  double search_shift = 0.4;   // search-center jitter, fraction of target extent
  double search_scale = 0.15;  // log-uniform jitter of the search side
  int radius = 2;              // regression target radius in cells
  double label_sigma = 0.75;
  double filter_lambda = 0.1;
  int filter_iterations = 5;
  int filter_kernel = 5;
  int static_templates = 3;
  head::IouLossForm loss_form = head::IouLossForm::OneMinusIou;
  int threads = 1;  // batch elements evaluated in parallel

  // ConfigError for negative rates or non-positive sizes.
  void validate() const;
};

// One template/search pair with all parameter-independent inputs prepared.
struct TrainSample {
  int sequence = 0;
  int template_frame = 0;
  int search_frame = 0;
  BBox template_box;           // image coordinates
  BBox search_box;             // image coordinates

  FeatureMap template_features;          // search-grid features around the template
  FeatureMap template_label;             // Gaussian at the template center
  attention::StackedTemplates templates;  // pooled 5x5 static templates
  FeatureMap search_features;
  FeatureMap search_label;
  BBox search_gt;              // ground truth in crop pixels
  GridPos center;              // cell nearest the ground-truth center
};

// Draws a pair from one sequence within max_gap frames. PreconditionError for
// an empty dataset.
TrainSample sample_pair(std::span<const Sequence> dataset, Rng& rng,
                        const TrainConfig& config, const FeatureConfig& features);

struct Losses {
  double cls = 0.0;
  double reg = 0.0;
  double total = 0.0;
};

// Classifier filters fit on each sample's template frame. They are treated as
// constants by the backward pass.
std::vector<FeatureMap> fit_sample_filters(const ModelParams& params,
                                           std::span<const TrainSample> batch,
                                           const TrainConfig& config);

// Batch-mean losses; accumulates d total / d params into grads when given.
Losses batch_loss(const ModelParams& params, std::span<const TrainSample> batch,
                  std::span<const FeatureMap> filters, const TrainConfig& config,
                  ModelParams* grads = nullptr);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// One optimizer step on the batch. NumericError if a loss is not finite.
Losses train_step(ModelParams& params, std::span<const TrainSample> batch,
                  AdamState& adam, double learning_rate, const TrainConfig& config);

// Learning rate in effect at a given iteration.
double scheduled_rate(const TrainConfig& config, int iteration);

struct LossRow {
  int step = 0;
  Losses losses;
};

struct TrainResult {
  ModelParams params;
  std::vector<LossRow> log;
};

TrainResult train(const TrainConfig& config, std::span<const Sequence> dataset,
                  ModelParams init);

// "step,cls_loss,reg_loss,total" with one row per iteration.
void write_loss_log(const std::filesystem::path& path, std::span<const LossRow> log);

}  // namespace treg
