#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "treg/bbox.h"
#include "treg/checkpoint.h"
#include "treg/feature_map.h"
#include "treg/target_attention.h"

namespace treg {

// Spatial size of every pooled template.
inline constexpr int kTemplateSize = 5;

struct TemplateEntry {
  FeatureMap features;  // C x 5 x 5
  double confidence = 1.0;
  long frame_index = 0;
  bool is_static = false;
};

struct BarSample {
  FeatureMap features;
  double confidence = 0.0;
  long frame_index = 0;
};

enum class CommitPolicy {
  Confidence,     // commit the most confident sample of the bar
  FixedInterval,  // commit the latest sample regardless of confidence
};

enum class StaticSelection {
  MostSimilar,  // identity + augmentations closest (cosine) to it
  FirstDrawn,   // identity + the first augmentations drawn
};

struct QueueConfig {
  int static_count = 3;
  int online_capacity = 4;
  // Commit boundary every n frames; 0 disables online updates.
  int update_interval = 25;
  CommitPolicy policy = CommitPolicy::Confidence;
  StaticSelection selection = StaticSelection::MostSimilar;
  // Identity plus augmented variants generated at initialization.
  int augmentations = 15;
};

// Pooled 5x5 templates of augmented copies of the target in a feature map.
// Element 0 is the unaugmented box; the others apply a seeded translation,
// rotation or blur. The box is in map coordinates (see roi_pool).
std::vector<FeatureMap> augmented_templates(const FeatureMap& features,
                                            const BBox& box, int count,
                                            std::uint64_t seed);

// Cosine similarity of two equally-shaped maps (0 if either is zero).
double cosine_similarity(const FeatureMap& a, const FeatureMap& b);

// Static + online template queue with a pending samples bar. Single owner,
// mutated by one tracker.
class TemplateQueue {
 public:
  explicit TemplateQueue(QueueConfig config = {});

  // Builds the static part from the first frame. The box is in map
  // coordinates; throws PreconditionError for a zero-area box.
  static TemplateQueue init_static(const FeatureMap& first_frame_features,
                                   const BBox& gt_box, std::uint64_t seed,
                                   QueueConfig config = {});

  // Queues a candidate for the next commit. frame_index must strictly
  // increase across calls (OrderingError otherwise).
  void observe(long frame_index, FeatureMap pooled_features, double confidence);

  // At a commit boundary (frame_index % n == 0 with a non-empty bar) promotes
  // one bar sample to an online entry, evicting the oldest online entry beyond
  // capacity, and clears the bar. Returns the committed entry.
  std::optional<TemplateEntry> maybe_commit(long frame_index);

  // Statics then online entries in commit order. PreconditionError before
  // initialization.
  attention::StackedTemplates as_stacked() const;

  bool initialized() const { return !statics_.empty(); }
  const QueueConfig& config() const { return config_; }
  const std::vector<TemplateEntry>& statics() const { return statics_; }
  const std::deque<TemplateEntry>& online() const { return online_; }
  const std::vector<BarSample>& samples_bar() const { return bar_; }
  int total() const { return static_cast<int>(statics_.size() + online_.size()); }

  // Persists committed entries, the bar and the configuration under prefix.
  void save(Checkpoint& ckpt, const std::string& prefix = "queue") const;
  static TemplateQueue load(const Checkpoint& ckpt,
                            const std::string& prefix = "queue");

 private:
  QueueConfig config_;
  std::vector<TemplateEntry> statics_;
  std::deque<TemplateEntry> online_;
  std::vector<BarSample> bar_;
  long last_observed_ = -1;
};

}  // namespace treg
