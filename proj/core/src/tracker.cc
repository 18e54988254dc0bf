#include "treg/tracker.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "treg/errors.h"
#include "treg/features.h"
#include "treg/fusion.h"
#include "treg/random.h"

namespace treg {

QueueMode parse_queue_mode(std::string_view name) {
  if (name == "static1") return QueueMode::Static1;
  if (name == "static3") return QueueMode::Static3;
  if (name == "static7") return QueueMode::Static7;
  if (name == "fixed") return QueueMode::Fixed;
  if (name == "confidence") return QueueMode::Confidence;
  throw ConfigError("unknown queue mode '" + std::string(name) +
                    "' (static1|static3|static7|fixed|confidence)");
}

std::string queue_mode_name(QueueMode mode) {
  switch (mode) {
    case QueueMode::Static1: return "static1";
    case QueueMode::Static3: return "static3";
    case QueueMode::Static7: return "static7";
    case QueueMode::Fixed: return "fixed";
    case QueueMode::Confidence: return "confidence";
  }
  return "confidence";
}

QueueConfig queue_config(QueueMode mode, int update_interval) {
  QueueConfig q;
  switch (mode) {
    case QueueMode::Static1:
      q.static_count = 1;
      q.update_interval = 0;
      break;
    case QueueMode::Static3:
      q.update_interval = 0;
      break;
    case QueueMode::Static7:
      q.static_count = 7;
      q.update_interval = 0;
      break;
    case QueueMode::Fixed:
      q.update_interval = update_interval;
      q.policy = CommitPolicy::FixedInterval;
      break;
    case QueueMode::Confidence:
      q.update_interval = update_interval;
      q.policy = CommitPolicy::Confidence;
      break;
  }
  return q;
}

namespace {

struct SearchView {
  CropWindow window;
  FeatureMap features;
};

SearchView search_view(const Image& frame, const BBox& box, const FeatureConfig& fc,
                       double dx = 0.0, double dy = 0.0, double angle = 0.0,
                       double blur_sigma = 0.0) {
  CropWindow w = search_window(box, fc);
  w.cx += dx;
  w.cy += dy;
  Image crop = crop_resize(frame, w.cx, w.cy, w.side, w.out, angle);
  if (blur_sigma > 0.0) crop = blur(crop, blur_sigma);
  return {w, extract_features(crop, fc)};
}

// Fractional grid position of a crop-pixel point.
std::pair<double, double> grid_coords(double x, double y, const GridGeometry& g) {
  return {(y - g.origin_y) / g.stride, (x - g.origin_x) / g.stride};
}

BBox clamp_to_map(const BBox& b, int grid) {
  Corners c = b.corners();
  c.x1 = std::clamp(c.x1, 0.0, grid - 1.0);
  c.y1 = std::clamp(c.y1, 0.0, grid - 1.0);
  c.x2 = std::clamp(c.x2, c.x1 + 1.0, static_cast<double>(grid));
  c.y2 = std::clamp(c.y2, c.y1 + 1.0, static_cast<double>(grid));
  return BBox::from_corners(c);
}

}  // namespace

Tracker::Tracker(ModelParams params, TrackerConfig config, std::uint64_t seed)
    : params_(std::move(params)), config_(config), seed_(seed),
      queue_(queue_config(config.queue, config.update_interval)) {}

void Tracker::init(const Image& frame, const BBox& box) {
  if (!box.valid()) throw PreconditionError("tracker init needs a valid box, got " + to_string(box));
  const FeatureConfig& fc = params_.features;
  const GridGeometry geom = fc.geometry();
  image_w_ = frame.width();
  image_h_ = frame.height();
  box_ = box;
  frame_ = 0;

  const SearchView view = search_view(frame, box, fc);
  const BBox map_box = crop_to_map(view.window.to_crop(box), fc);
  queue_ = TemplateQueue::init_static(view.features, map_box, derive_seed(seed_, 1),
                                      queue_config(config_.queue, config_.update_interval));
  const attention::StackedTemplates templates = queue_.as_stacked();

  // First-frame classifier samples: identity, shifted, rotated and blurred crops.
  Rng rng(derive_seed(seed_, 2));
  const double extent = std::sqrt(box.w * box.h);
  samples_.clear();
  for (int k = 0; k < config_.init_samples; ++k) {
    double dx = 0.0, dy = 0.0, angle = 0.0, sigma = 0.0;
    if (k > 0) {
      switch ((k - 1) % 3) {
        case 0:
          dx = rng.uniform(-0.3, 0.3) * extent;
          dy = rng.uniform(-0.3, 0.3) * extent;
          break;
        case 1:
          angle = rng.uniform(-1.0, 1.0) * std::numbers::pi / 12.0;
          break;
        default:
          dx = rng.uniform(-0.15, 0.15) * extent;
          dy = rng.uniform(-0.15, 0.15) * extent;
          sigma = rng.uniform(0.5, 1.5);
          break;
      }
    }
    const SearchView v = search_view(frame, box, fc, dx, dy, angle, sigma);
    const BBox tb = v.window.to_crop(box);
    const auto [row, col] = grid_coords(tb.cx, tb.cy, geom);
    samples_.push_back({classification_features(params_, v.features, templates),
                        classifier::gaussian_label_at(row, col, config_.label_sigma,
                                                      fc.grid(), fc.grid())});
  }
  pending_.reset();
  refit(config_.init_iterations, false);
}

void Tracker::refit(int iterations, bool warm) {
  classifier::FitOptions opt;
  opt.kernel = config_.filter_kernel;
  opt.iterations = iterations;
  const FeatureMap warm_start = filter_.weights;
  filter_ = classifier::fit_filter(samples_, config_.filter_lambda, opt, nullptr,
                                   warm && !warm_start.empty() ? &warm_start : nullptr);
}

FrameOutput Tracker::track(const Image& frame, bool with_attention) {
  if (frame_ < 0) throw PreconditionError("tracker used before init");
  ++frame_;
  const FeatureConfig& fc = params_.features;
  const GridGeometry geom = fc.geometry();
  const int grid = fc.grid();

  const SearchView view = search_view(frame, box_, fc);
  const attention::StackedTemplates templates = queue_.as_stacked();

  const FeatureMap cls_feat = classification_features(params_, view.features, templates);
  FrameOutput out;
  out.score = classifier::score(filter_, cls_feat);
  const classifier::Location loc = classifier::locate(out.score);
  out.confidence = loc.confidence;

  const FeatureMap reg_feat = regression_features(params_, view.features, templates);
  const FeatureMap offsets = head::predict_offsets(reg_feat, params_.head);
  const BBox crop_box = head::infer_box(offsets, out.score, geom, config_.infer);
  BBox next = view.window.to_image(crop_box);

  // Damped size update, then keep the box inside the image.
  const double a = config_.size_rate;
  next.w = std::clamp((1.0 - a) * box_.w + a * next.w, 4.0, static_cast<double>(image_w_));
  next.h = std::clamp((1.0 - a) * box_.h + a * next.h, 4.0, static_cast<double>(image_h_));
  next.cx = std::clamp(next.cx, 0.0, static_cast<double>(image_w_));
  next.cy = std::clamp(next.cy, 0.0, static_cast<double>(image_h_));
  if (!std::isfinite(next.cx) || !std::isfinite(next.cy) || !std::isfinite(next.w) ||
      !std::isfinite(next.h)) {
    throw NumericError("tracker produced a non-finite box at frame " + std::to_string(frame_));
  }
  box_ = next;
  out.box = next;

  // Template candidate and classifier sample from the tracked box.
  const BBox tracked_crop = view.window.to_crop(next);
  queue_.observe(frame_, roi_pool(view.features, clamp_to_map(crop_to_map(tracked_crop, fc), grid),
                                  kTemplateSize),
                 loc.confidence);
  queue_.maybe_commit(frame_);

  if (loc.confidence >= config_.sample_confidence) {
    const auto [row, col] = grid_coords(tracked_crop.cx, tracked_crop.cy, geom);
    pending_ = classifier::FilterSample{
        cls_feat, classifier::gaussian_label_at(row, col, config_.label_sigma, grid, grid)};
  }
  if (config_.refresh_interval > 0 && frame_ % config_.refresh_interval == 0 && pending_) {
    samples_.push_back(std::move(*pending_));
    pending_.reset();
    if (static_cast<int>(samples_.size()) > config_.sample_capacity) samples_.erase(samples_.begin());
    refit(config_.refresh_iterations, true);
  }

  if (with_attention) {
    out.attention = attention::attention_map(view.features, templates, params_.attention);
  }
  return out;
}

TrackResult track_sequence(const ModelParams& params, const Sequence& seq,
                           const TrackerConfig& config, std::uint64_t seed) {
  if (seq.frames.empty() || seq.frames.size() != seq.boxes.size()) {
    throw PreconditionError("sequence '" + seq.name + "' has no frames or mismatched boxes");
  }
  Tracker tracker(params, config, seed);
  tracker.init(seq.frames[0].image(), seq.boxes[0]);
  std::vector<BBox> predicted{seq.boxes[0]};
  for (std::size_t f = 1; f < seq.frames.size(); ++f) {
    predicted.push_back(tracker.track(seq.frames[f].image()).box);
  }
  return TrackResult::from_boxes(std::move(predicted), seq.boxes);
}

}  // namespace treg
