#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "treg/fusion.h"
#include "treg/metrics.h"
#include "treg/synthetic.h"
#include "treg/tracker.h"
#include "treg/trainer.h"

namespace treg {

// Sequences of several kinds, kept in generation order.
struct Suite {
  std::vector<Sequence> sequences;
  std::vector<SuiteKind> kinds;  // parallel to sequences
};

// per_kind sequences of each of RIGID, SCALE and DEFORM.
Suite make_mixed_suite(int per_kind, std::uint64_t seed, int length = 100);

struct AblationEntry {
  std::string name;
  std::filesystem::path checkpoint;
  QueueMode queue = QueueMode::Confidence;
};

struct AblationRow {
  std::string config;
  double auc = 0.0;
  double precision = 0.0;
};

// Tracks the whole suite with every entry. Emits one row per entry and one
// per entry and sequence kind ("name/deform"). Sequence i is tracked with
// tracker seed derive_seed(seed, i) under every entry. ConfigError for a
// missing checkpoint.
std::vector<AblationRow> run_ablation(std::span<const AblationEntry> entries,
                                      const Suite& suite, const TrackerConfig& tracker,
                                      std::uint64_t seed, int threads = 1);

// Per-sequence results of one configuration (parallel across sequences,
// merged by index).
std::vector<TrackResult> evaluate_suite(const ModelParams& params, const Suite& suite,
                                        const TrackerConfig& tracker, std::uint64_t seed,
                                        int threads = 1);

void write_ablation_csv(const std::filesystem::path& path, std::span<const AblationRow> rows);

// Full train-then-evaluate protocol over several seeds.
struct AblationPlan {
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  int eval_per_kind = 20;
  int train_per_kind = 10;
  int length = 100;
  TrainConfig train;
  TrackerConfig tracker;
  std::vector<FusionKind> fusions = {FusionKind::TargetAwareTransformer,
                                     FusionKind::DepthwiseCorrelation,
                                     FusionKind::PixelCorrAttention, FusionKind::NoFusion};
  bool tat_cls = true;  // also train the attention-on-classification variant
  // Queue rows use the TAT model.
  std::vector<QueueMode> queue_modes = {QueueMode::Static1, QueueMode::Static3,
                                        QueueMode::Static7, QueueMode::Fixed,
                                        QueueMode::Confidence};
  int threads = 1;
};

// Writes checkpoints and loss logs under workdir/seed_<s>/ and returns rows
// "s<seed>/<config>[/<kind>]" followed by seed means "mean/<config>[/<kind>]".
// Fusion configs are named by fusion_name ("tat", "dwcorr", ...), the
// classification variant "tat_cls", queue configs "queue_<mode>".
std::vector<AblationRow> run_ablation_plan(
    const AblationPlan& plan, const std::filesystem::path& workdir,
    const std::function<void(const std::string&)>& progress = {});

// Row lookup by config name; ConfigError if absent.
const AblationRow& find_row(std::span<const AblationRow> rows, const std::string& config);

}  // namespace treg
