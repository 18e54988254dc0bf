#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "treg/classifier.h"
#include "treg/image.h"
#include "treg/metrics.h"
#include "treg/model.h"
#include "treg/regression_head.h"
#include "treg/synthetic.h"
#include "treg/template_queue.h"

namespace treg {

// Named queue configurations used on the command line and in ablations.
enum class QueueMode { Static1, Static3, Static7, Fixed, Confidence };

QueueMode parse_queue_mode(std::string_view name);
std::string queue_mode_name(QueueMode mode);
QueueConfig queue_config(QueueMode mode, int update_interval = 25);

struct TrackerConfig {
  QueueMode queue = QueueMode::Confidence;
  int update_interval = 25;
  head::InferMode infer = head::InferMode::NeighborhoodAverage;

  double label_sigma = 0.75;      // Gaussian label width in cells
  double filter_lambda = 0.1;
  int filter_kernel = 5;
  int init_samples = 15;          // augmented first-frame samples
  int init_iterations = 50;
  int refresh_interval = 10;      // frames between classifier refits
  int refresh_iterations = 10;
  int sample_capacity = 15;
  double sample_confidence = 0.6; // minimum confidence of a stored sample

  // Fraction of the newly regressed size adopted each frame.
  double size_rate = 0.1;
};

// Everything computed for one frame; the maps are on the search grid.
struct FrameOutput {
  BBox box;                 // image coordinates
  double confidence = 0.0;
  FeatureMap score;
  FeatureMap attention;     // filled only when requested
};

// Online tracker: feature crop, classifier, template queue, fusion and head.
// Single owner; frames must be fed in order.
class Tracker {
 public:
  Tracker(ModelParams params, TrackerConfig config, std::uint64_t seed);

  void init(const Image& frame, const BBox& box);
  FrameOutput track(const Image& frame, bool with_attention = false);

  const BBox& box() const { return box_; }
  long frame_index() const { return frame_; }
  const TemplateQueue& queue() const { return queue_; }
  const classifier::OnlineFilter& filter() const { return filter_; }
  const ModelParams& params() const { return params_; }

 private:
  void refit(int iterations, bool warm);

  ModelParams params_;
  TrackerConfig config_;
  std::uint64_t seed_;
  TemplateQueue queue_;
  classifier::OnlineFilter filter_;
  std::vector<classifier::FilterSample> samples_;
  std::optional<classifier::FilterSample> pending_;
  BBox box_;
  long frame_ = -1;
  int image_w_ = 0;
  int image_h_ = 0;
};

// Runs a tracker over a whole sequence. Frame 0 reports the initial box.
TrackResult track_sequence(const ModelParams& params, const Sequence& seq,
                           const TrackerConfig& config, std::uint64_t seed);

}  // namespace treg
