#include "treg/template_queue.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "treg/errors.h"
#include "treg/random.h"
#include "treg/tensor_kernels.h"

namespace treg {

namespace {

double sample_bilinear(const FeatureMap& map, int c, double y, double x) {
  // (x, y) in cell-index units; clamps at the border.
  x = std::clamp(x, 0.0, static_cast<double>(map.width() - 1));
  y = std::clamp(y, 0.0, static_cast<double>(map.height() - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, map.width() - 1);
  const int y1 = std::min(y0 + 1, map.height() - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  return (1 - fy) * ((1 - fx) * map.at(c, y0, x0) + fx * map.at(c, y0, x1)) +
         fy * ((1 - fx) * map.at(c, y1, x0) + fx * map.at(c, y1, x1));
}

// Rotates the map content by angle (radians) about (cx, cy) in map units.
FeatureMap rotate(const FeatureMap& map, double cx, double cy, double angle) {
  FeatureMap out(map.channels(), map.height(), map.width());
  const double ca = std::cos(angle);
  const double sa = std::sin(angle);
  for (int r = 0; r < map.height(); ++r) {
    for (int q = 0; q < map.width(); ++q) {
      const double dx = q + 0.5 - cx;
      const double dy = r + 0.5 - cy;
      const double sx = cx + ca * dx + sa * dy - 0.5;
      const double sy = cy - sa * dx + ca * dy - 0.5;
      for (int c = 0; c < map.channels(); ++c) out.at(c, r, q) = sample_bilinear(map, c, sy, sx);
    }
  }
  return out;
}

FeatureMap gaussian_blur(const FeatureMap& map, double sigma) {
  const int radius = static_cast<int>(std::ceil(2.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  const double sum = std::accumulate(k.begin(), k.end(), 0.0);
  for (double& v : k) v /= sum;
  FeatureMap tmp(map.channels(), map.height(), map.width());
  FeatureMap out(map.channels(), map.height(), map.width());
  for (int c = 0; c < map.channels(); ++c) {
    for (int r = 0; r < map.height(); ++r) {
      for (int q = 0; q < map.width(); ++q) {
        double s = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          s += k[i + radius] * map.at(c, r, std::clamp(q + i, 0, map.width() - 1));
        }
        tmp.at(c, r, q) = s;
      }
    }
    for (int r = 0; r < map.height(); ++r) {
      for (int q = 0; q < map.width(); ++q) {
        double s = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          s += k[i + radius] * tmp.at(c, std::clamp(r + i, 0, map.height() - 1), q);
        }
        out.at(c, r, q) = s;
      }
    }
  }
  return out;
}

void check_template_shape(const FeatureMap& f) {
  if (f.height() != kTemplateSize || f.width() != kTemplateSize) {
    throw ShapeError("template features must be Cx5x5, got " + f.shape_string());
  }
}

std::uint32_t u32(long v) { return static_cast<std::uint32_t>(v); }

}  // namespace

std::vector<FeatureMap> augmented_templates(const FeatureMap& features,
                                            const BBox& box, int count,
                                            std::uint64_t seed) {
  if (!box.valid()) {
    throw PreconditionError("template augmentation needs a positive-area box, got " +
                            to_string(box));
  }
  // Rotation and blur only reach a few cells, so they run on a window around
  // the box that stays inside the map; pooled values match the full-map result.
  const int margin = 4 + static_cast<int>(std::ceil(0.3 * std::hypot(box.w, box.h) / 2.0));
  const Corners c = box.corners();
  const int r0 = std::clamp(static_cast<int>(std::floor(c.y1)) - margin, 0, features.height() - 1);
  const int c0 = std::clamp(static_cast<int>(std::floor(c.x1)) - margin, 0, features.width() - 1);
  const int r1 = std::clamp(static_cast<int>(std::ceil(c.y2)) + margin, r0 + 1, features.height());
  const int c1 = std::clamp(static_cast<int>(std::ceil(c.x2)) + margin, c0 + 1, features.width());
  const FeatureMap local = features.crop(r0, c0, r1 - r0, c1 - c0);
  BBox local_box = box;
  local_box.cx -= c0;
  local_box.cy -= r0;

  Rng rng(seed);
  std::vector<FeatureMap> out;
  out.push_back(roi_pool(features, box, kTemplateSize));
  for (int k = 1; k < count; ++k) {
    BBox shifted = local_box;
    shifted.cx += rng.uniform(-0.1, 0.1) * box.w;
    shifted.cy += rng.uniform(-0.1, 0.1) * box.h;
    switch ((k - 1) % 3) {
      case 0:
        out.push_back(roi_pool(local, shifted, kTemplateSize));
        break;
      case 1: {
        const double angle = rng.uniform(-1.0, 1.0) * std::numbers::pi / 12.0;
        out.push_back(roi_pool(rotate(local, local_box.cx, local_box.cy, angle), shifted,
                               kTemplateSize));
        break;
      }
      default: {
        const double sigma = rng.uniform(0.5, 1.5);
        out.push_back(roi_pool(gaussian_blur(local, sigma), shifted, kTemplateSize));
        break;
      }
    }
  }
  return out;
}

double cosine_similarity(const FeatureMap& a, const FeatureMap& b) {
  const double ab = dot(a, b);
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return ab / (na * nb);
}

TemplateQueue::TemplateQueue(QueueConfig config) : config_(config) {
  if (config_.static_count < 1 || config_.online_capacity < 0 ||
      config_.update_interval < 0 || config_.augmentations < config_.static_count) {
    throw ConfigError("invalid template queue configuration");
  }
}

TemplateQueue TemplateQueue::init_static(const FeatureMap& first_frame_features,
                                         const BBox& gt_box, std::uint64_t seed,
                                         QueueConfig config) {
  TemplateQueue q(config);
  const std::vector<FeatureMap> variants = augmented_templates(
      first_frame_features, gt_box, config.augmentations, seed);

  std::vector<int> order(variants.size() - 1);
  std::iota(order.begin(), order.end(), 1);
  if (config.selection == StaticSelection::MostSimilar) {
    std::vector<double> sim(variants.size());
    for (std::size_t k = 1; k < variants.size(); ++k) {
      sim[k] = cosine_similarity(variants[0], variants[k]);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return sim[a] > sim[b]; });
  }
  q.statics_.push_back({variants[0], 1.0, 0, true});
  for (int k = 0; k + 1 < config.static_count; ++k) {
    q.statics_.push_back({variants[order[k]], 1.0, 0, true});
  }
  return q;
}

void TemplateQueue::observe(long frame_index, FeatureMap pooled_features,
                            double confidence) {
  if (frame_index <= last_observed_) {
    throw OrderingError("observe: frame index " + std::to_string(frame_index) +
                        " does not follow " + std::to_string(last_observed_));
  }
  check_template_shape(pooled_features);
  last_observed_ = frame_index;
  bar_.push_back({std::move(pooled_features), confidence, frame_index});
}

std::optional<TemplateEntry> TemplateQueue::maybe_commit(long frame_index) {
  const int n = config_.update_interval;
  if (n <= 0 || frame_index % n != 0 || bar_.empty() || config_.online_capacity == 0) {
    return std::nullopt;
  }
  std::size_t pick = bar_.size() - 1;
  if (config_.policy == CommitPolicy::Confidence) {
    // Ties go to the most recent sample.
    for (std::size_t i = 0; i < bar_.size(); ++i) {
      if (bar_[i].confidence >= bar_[pick].confidence) pick = i;
    }
  }
  TemplateEntry entry{std::move(bar_[pick].features), bar_[pick].confidence,
                      bar_[pick].frame_index, false};
  bar_.clear();
  online_.push_back(entry);
  while (static_cast<int>(online_.size()) > config_.online_capacity) online_.pop_front();
  return entry;
}

attention::StackedTemplates TemplateQueue::as_stacked() const {
  if (!initialized()) {
    throw PreconditionError("template queue used before init_static");
  }
  std::vector<FeatureMap> entries;
  for (const TemplateEntry& e : statics_) entries.push_back(e.features);
  for (const TemplateEntry& e : online_) entries.push_back(e.features);
  return attention::StackedTemplates(std::move(entries));
}

void TemplateQueue::save(Checkpoint& ckpt, const std::string& prefix) const {
  const double cfg[] = {static_cast<double>(config_.static_count),
                        static_cast<double>(config_.online_capacity),
                        static_cast<double>(config_.update_interval),
                        config_.policy == CommitPolicy::Confidence ? 0.0 : 1.0,
                        static_cast<double>(last_observed_)};
  ckpt.add(prefix + "/config", {5}, cfg);
  auto put = [&](const std::string& name, const FeatureMap& f, double conf, long frame) {
    ckpt.add(name + "/features",
             {u32(f.channels()), u32(f.height()), u32(f.width())}, f.data());
    const double meta[] = {conf, static_cast<double>(frame)};
    ckpt.add(name + "/meta", {2}, meta);
  };
  ckpt.add_scalar(prefix + "/static_count", static_cast<double>(statics_.size()));
  ckpt.add_scalar(prefix + "/online_count", static_cast<double>(online_.size()));
  ckpt.add_scalar(prefix + "/bar_count", static_cast<double>(bar_.size()));
  for (std::size_t i = 0; i < statics_.size(); ++i) {
    put(prefix + "/static/" + std::to_string(i), statics_[i].features,
        statics_[i].confidence, statics_[i].frame_index);
  }
  for (std::size_t i = 0; i < online_.size(); ++i) {
    put(prefix + "/online/" + std::to_string(i), online_[i].features,
        online_[i].confidence, online_[i].frame_index);
  }
  for (std::size_t i = 0; i < bar_.size(); ++i) {
    put(prefix + "/bar/" + std::to_string(i), bar_[i].features, bar_[i].confidence,
        bar_[i].frame_index);
  }
}

TemplateQueue TemplateQueue::load(const Checkpoint& ckpt, const std::string& prefix) {
  const std::vector<double> cfg = ckpt.get(prefix + "/config").as_double();
  if (cfg.size() != 5) throw ConfigError("malformed queue config record");
  QueueConfig config;
  config.static_count = static_cast<int>(cfg[0]);
  config.online_capacity = static_cast<int>(cfg[1]);
  config.update_interval = static_cast<int>(cfg[2]);
  config.policy = cfg[3] == 0.0 ? CommitPolicy::Confidence : CommitPolicy::FixedInterval;
  TemplateQueue q(config);
  q.last_observed_ = static_cast<long>(cfg[4]);
  auto get = [&](const std::string& name) {
    const NamedTensor& t = ckpt.get(name + "/features");
    if (t.dims.size() != 3) throw ConfigError("malformed template record " + name);
    FeatureMap f(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]),
                 static_cast<int>(t.dims[2]), t.as_double());
    const std::vector<double> meta = ckpt.get(name + "/meta").as_double();
    return std::make_tuple(std::move(f), meta.at(0), static_cast<long>(meta.at(1)));
  };
  const int ns = static_cast<int>(ckpt.scalar(prefix + "/static_count"));
  const int no = static_cast<int>(ckpt.scalar(prefix + "/online_count"));
  const int nb = static_cast<int>(ckpt.scalar(prefix + "/bar_count"));
  for (int i = 0; i < ns; ++i) {
    auto [f, c, k] = get(prefix + "/static/" + std::to_string(i));
    q.statics_.push_back({std::move(f), c, k, true});
  }
  for (int i = 0; i < no; ++i) {
    auto [f, c, k] = get(prefix + "/online/" + std::to_string(i));
    q.online_.push_back({std::move(f), c, k, false});
  }
  for (int i = 0; i < nb; ++i) {
    auto [f, c, k] = get(prefix + "/bar/" + std::to_string(i));
    q.bar_.push_back({std::move(f), c, k});
  }
  return q;
}

}  // namespace treg
