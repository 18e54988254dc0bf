#include "treg/trainer.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "treg/classifier.h"
#include "treg/errors.h"
#include "treg/features.h"
#include "treg/fusion.h"
#include "treg/template_queue.h"

namespace treg {

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("invalid training config: ") + what);
  };
  require(iterations >= 0, "iterations must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(learning_rate >= 0.0, "learning_rate must be >= 0");
  require(decay > 0.0, "decay must be > 0");
  require(cls_weight >= 0.0 && reg_weight >= 0.0, "loss weights must be >= 0");
  require(max_gap >= 0, "max_gap must be >= 0");
  require(search_shift >= 0.0 && search_scale >= 0.0, "search jitter must be >= 0");
  require(radius >= 0, "radius must be >= 0");
  require(label_sigma > 0.0 && filter_lambda > 0.0, "label_sigma and filter_lambda must be > 0");
  require(filter_iterations >= 0 && filter_kernel >= 1, "bad classifier filter settings");
  require(static_templates >= 1, "static_templates must be >= 1");
  require(threads >= 1, "threads must be >= 1");
  for (double m : milestones) require(m > 0.0 && m < 1.0, "milestones must lie in (0, 1)");
}

TrainSample sample_pair(std::span<const Sequence> dataset, Rng& rng,
                        const TrainConfig& config, const FeatureConfig& fc) {
  if (dataset.empty()) throw PreconditionError("sample_pair: empty dataset");
  const GridGeometry geom = fc.geometry();
  const int grid = fc.grid();

  TrainSample s;
  s.sequence = rng.uniform_int(0, static_cast<int>(dataset.size()) - 1);
  const Sequence& seq = dataset[static_cast<std::size_t>(s.sequence)];
  if (seq.frames.empty()) throw PreconditionError("sample_pair: sequence without frames");
  const int last = static_cast<int>(seq.frames.size()) - 1;
  s.template_frame = rng.uniform_int(0, last);
  s.search_frame = std::clamp(s.template_frame + rng.uniform_int(-config.max_gap, config.max_gap),
                              0, last);
  s.template_box = seq.boxes[static_cast<std::size_t>(s.template_frame)];
  s.search_box = seq.boxes[static_cast<std::size_t>(s.search_frame)];
  const std::uint64_t queue_seed = rng.next_u64();
  const double extent = std::sqrt(s.search_box.w * s.search_box.h);
  const double dx = rng.uniform(-config.search_shift, config.search_shift) * extent;
  const double dy = rng.uniform(-config.search_shift, config.search_shift) * extent;
  const double scale = std::exp(rng.uniform(-config.search_scale, config.search_scale));

  // Template side: window centered on the box, static templates as at init.
  const CropWindow tw = search_window(s.template_box, fc);
  const Image tframe = seq.frames[static_cast<std::size_t>(s.template_frame)].image();
  s.template_features = extract_features(crop_resize(tframe, tw.cx, tw.cy, tw.side, tw.out), fc);
  const BBox tcrop = tw.to_crop(s.template_box);
  s.template_label = classifier::gaussian_label_at((tcrop.cy - geom.origin_y) / geom.stride,
                                                   (tcrop.cx - geom.origin_x) / geom.stride,
                                                   config.label_sigma, grid, grid);
  QueueConfig qc;
  qc.static_count = config.static_templates;
  qc.update_interval = 0;
  s.templates = TemplateQueue::init_static(s.template_features, crop_to_map(tcrop, fc),
                                           queue_seed, qc)
                    .as_stacked();

  // Search side: jittered window.
  CropWindow sw = search_window(s.search_box, fc);
  sw.cx += dx;
  sw.cy += dy;
  sw.side *= scale;
  const Image sframe = seq.frames[static_cast<std::size_t>(s.search_frame)].image();
  s.search_features = extract_features(crop_resize(sframe, sw.cx, sw.cy, sw.side, sw.out), fc);
  s.search_gt = sw.to_crop(s.search_box);
  s.search_label = classifier::gaussian_label_at((s.search_gt.cy - geom.origin_y) / geom.stride,
                                                 (s.search_gt.cx - geom.origin_x) / geom.stride,
                                                 config.label_sigma, grid, grid);
  GridPos c = geom.nearest(s.search_gt.cx, s.search_gt.cy);
  c.row = std::clamp(c.row, 0, grid - 1);
  c.col = std::clamp(c.col, 0, grid - 1);
  s.center = c;
  return s;
}

std::vector<FeatureMap> fit_sample_filters(const ModelParams& params,
                                           std::span<const TrainSample> batch,
                                           const TrainConfig& config) {
  std::vector<FeatureMap> filters;
  classifier::FitOptions opt;
  opt.kernel = config.filter_kernel;
  opt.iterations = config.filter_iterations;
  for (const TrainSample& s : batch) {
    const classifier::FilterSample fs{
        classification_features(params, s.template_features, s.templates), s.template_label};
    filters.push_back(classifier::fit_filter({&fs, 1}, config.filter_lambda, opt).weights);
  }
  return filters;
}

namespace {

void add(std::vector<double>& dst, const std::vector<double>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void add(PointwiseLinear& dst, const PointwiseGrads& g) {
  add(dst.weights, g.d_weights);
  if (dst.has_bias()) add(dst.bias, g.d_bias);
}

void add(attention::AttentionParams& dst, const attention::AttentionGrads& g) {
  add(dst.theta.weights, g.d_theta);
  add(dst.phi.weights, g.d_phi);
  add(dst.omega.weights, g.d_omega);
  add(dst.w_out.weights, g.d_w_out);
}

// Unscaled per-sample losses; gradients of (cls_scale * cls + reg_scale * reg)
// go to grads when given.
Losses sample_loss(const ModelParams& params, const TrainSample& s, const FeatureMap& filter,
                   const TrainConfig& config, double cls_scale, double reg_scale,
                   ModelParams* grads) {
  const attention::TransformOptions opts{params.average_residual};
  const GridGeometry geom = params.features.geometry();
  const int grid = s.search_features.height();
  Losses out;

  // Classification: MSE of the score map against the Gaussian label.
  const FeatureMap base = classification_base(params, s.search_features, s.templates);
  const FeatureMap z = pointwise_apply(params.cls, base);
  const FeatureMap score = classifier::correlate(filter, z);
  const double cells = static_cast<double>(score.size());
  FeatureMap d_score(1, grid, grid);
  for (std::size_t i = 0; i < score.size(); ++i) {
    const double diff = score.data()[i] - s.search_label.data()[i];
    out.cls += diff * diff / cells;
    d_score.data()[i] = cls_scale * 2.0 * diff / cells;
  }
  if (grads && cls_scale != 0.0) {
    const FeatureMap d_z = classifier::correlate_backward_feature(filter, d_score, grid, grid);
    const PointwiseGrads g = pointwise_backward(params.cls, base, d_z);
    add(grads->cls, g);
    if (params.tat_cls) {
      add(*grads->cls_attention,
          attention::transform_backward(s.search_features, s.templates, *params.cls_attention,
                                        g.d_input, opts));
    }
  }

  // Regression: IoU loss at the target cells around the ground-truth center.
  const int r = config.radius;
  const int k = 2 * r + 1;
  const int row0 = s.center.row - r;
  const int col0 = s.center.col - r;
  const FeatureMap window = s.search_features.crop(row0, col0, k, k);
  FeatureMap fused;
  switch (params.fusion) {
    case FusionKind::TargetAwareTransformer:
      fused = attention::transform(window, s.templates, params.attention, opts);
      break;
    case FusionKind::DepthwiseCorrelation:
      fused = fusion::depthwise_correlation(s.search_features, s.templates.entry(0))
                  .crop(row0, col0, k, k);
      break;
    case FusionKind::PixelCorrAttention:
      fused = fusion::pixel_corr_attention(window, s.templates);
      break;
    case FusionKind::NoFusion:
      fused = window;
      break;
  }
  const FeatureMap offsets = head::predict_offsets(fused, params.head);
  const std::vector<head::RegressionTarget> targets =
      head::training_targets(s.search_gt, s.center, r, geom, grid, grid);
  if (targets.empty()) return out;
  FeatureMap d_off(4, k, k);
  const double inv = 1.0 / static_cast<double>(targets.size());
  for (const head::RegressionTarget& t : targets) {
    const int lr = t.pos.row - row0;
    const int lc = t.pos.col - col0;
    const head::Offsets pred{offsets.at(0, lr, lc), offsets.at(1, lr, lc), offsets.at(2, lr, lc),
                             offsets.at(3, lr, lc)};
    const head::IouLossResult res =
        head::iou_loss(pred, geom.point(t.pos), s.search_gt, config.loss_form);
    out.reg += res.loss * inv;
    for (int ch = 0; ch < 4; ++ch) {
      d_off.at(ch, lr, lc) = reg_scale * inv * res.d_offsets[static_cast<std::size_t>(ch)];
    }
  }
  if (grads && reg_scale != 0.0) {
    const head::HeadGrads hg = head::predict_offsets_backward(fused, params.head, d_off);
    add(grads->head.l1, hg.l1);
    add(grads->head.l2, hg.l2);
    add(grads->head.l3, hg.l3);
    if (params.fusion == FusionKind::TargetAwareTransformer) {
      add(grads->attention,
          attention::transform_backward(window, s.templates, params.attention, hg.d_feature,
                                        opts));
    }
  }
  return out;
}

}  // namespace

Losses batch_loss(const ModelParams& params, std::span<const TrainSample> batch,
                  std::span<const FeatureMap> filters, const TrainConfig& config,
                  ModelParams* grads) {
  if (batch.empty()) throw PreconditionError("batch_loss: empty batch");
  if (filters.size() != batch.size()) throw ShapeError("batch_loss: one filter per sample");
  const double n = static_cast<double>(batch.size());
  const double cls_scale = config.cls_weight / n;
  const double reg_scale = config.reg_weight / n;

  // Per-sample buffers reduced in index order, so results do not depend on
  // the thread count.
  std::vector<Losses> losses(batch.size());
  std::vector<ModelParams> sample_grads;
  if (grads) sample_grads.assign(batch.size(), params.zeros_like());
  auto run = [&](std::size_t i) {
    losses[i] = sample_loss(params, batch[i], filters[i], config, cls_scale, reg_scale,
                            grads ? &sample_grads[i] : nullptr);
  };
  const std::size_t threads =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(1, config.threads)), batch.size());
  if (threads <= 1) {
    for (std::size_t i = 0; i < batch.size(); ++i) run(i);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < batch.size(); i += threads) run(i);
      });
    }
  }

  Losses total;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    total.cls += losses[i].cls / n;
    total.reg += losses[i].reg / n;
  }
  total.total = config.cls_weight * total.cls + config.reg_weight * total.reg;
  if (grads) {
    std::vector<ModelParams::Tensor> dst = grads->tensors();
    for (ModelParams& g : sample_grads) {
      std::vector<ModelParams::Tensor> src = g.tensors();
      for (std::size_t t = 0; t < dst.size(); ++t) {
        for (std::size_t j = 0; j < dst[t].values.size(); ++j) dst[t].values[j] += src[t].values[j];
      }
    }
  }
  return total;
}

Losses train_step(ModelParams& params, std::span<const TrainSample> batch, AdamState& adam,
                  double learning_rate, const TrainConfig& config) {
  const std::vector<FeatureMap> filters = fit_sample_filters(params, batch, config);
  ModelParams grads = params.zeros_like();
  const Losses losses = batch_loss(params, batch, filters, config, &grads);
  const std::vector<double> g = grads.flatten();
  const bool finite_grad = std::all_of(g.begin(), g.end(), [](double v) { return std::isfinite(v); });
  if (!std::isfinite(losses.total) || !finite_grad) {
    std::ostringstream msg;
    msg << "non-finite training state at step " << adam.step << ": cls=" << losses.cls
        << " reg=" << losses.reg << " total=" << losses.total
        << (finite_grad ? "" : " (non-finite gradient)") << "; batch:";
    for (const TrainSample& s : batch) {
      msg << " [seq " << s.sequence << " frames " << s.template_frame << "->" << s.search_frame
          << " gt " << to_string(s.search_gt) << "]";
    }
    throw NumericError(msg.str());
  }

  std::vector<double> p = params.flatten();
  if (adam.m.size() != p.size()) {
    adam.m.assign(p.size(), 0.0);
    adam.v.assign(p.size(), 0.0);
    adam.step = 0;
  }
  ++adam.step;
  const double c1 = 1.0 - std::pow(adam.beta1, static_cast<double>(adam.step));
  const double c2 = 1.0 - std::pow(adam.beta2, static_cast<double>(adam.step));
  for (std::size_t i = 0; i < p.size(); ++i) {
    adam.m[i] = adam.beta1 * adam.m[i] + (1.0 - adam.beta1) * g[i];
    adam.v[i] = adam.beta2 * adam.v[i] + (1.0 - adam.beta2) * g[i] * g[i];
    const double step = (adam.m[i] / c1) / (std::sqrt(adam.v[i] / c2) + adam.epsilon);
    p[i] -= learning_rate * step;
  }
  params.unflatten(p);
  return losses;
}

double scheduled_rate(const TrainConfig& config, int iteration) {
  double rate = config.learning_rate;
  for (double m : config.milestones) {
    if (iteration >= static_cast<int>(m * config.iterations)) rate *= config.decay;
  }
  return rate;
}

TrainResult train(const TrainConfig& config, std::span<const Sequence> dataset,
                  ModelParams init) {
  config.validate();
  TrainResult result{std::move(init), {}};
  if (config.iterations == 0) return result;
  if (dataset.empty()) throw PreconditionError("train: empty dataset");
  Rng rng(config.seed);
  AdamState adam;
  result.log.reserve(static_cast<std::size_t>(config.iterations));
  for (int it = 0; it < config.iterations; ++it) {
    std::vector<TrainSample> batch;
    batch.reserve(static_cast<std::size_t>(config.batch_size));
    for (int b = 0; b < config.batch_size; ++b) {
      batch.push_back(sample_pair(dataset, rng, config, result.params.features));
    }
    const Losses l =
        train_step(result.params, batch, adam, scheduled_rate(config, it), config);
    result.log.push_back({it, l});
  }
  return result;
}

void write_loss_log(const std::filesystem::path& path, std::span<const LossRow> log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "step,cls_loss,reg_loss,total\n";
  for (const LossRow& row : log) {
    out << row.step << ',' << format_double(row.losses.cls) << ','
        << format_double(row.losses.reg) << ',' << format_double(row.losses.total) << '\n';
  }
}

}  // namespace treg
