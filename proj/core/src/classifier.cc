#include "treg/classifier.h"

#include <algorithm>
#include <cmath>

#include "treg/errors.h"

namespace treg::classifier {

GridPos argmax_position(const FeatureMap& score) {
  if (score.empty()) throw PreconditionError("argmax of an empty score map");
  GridPos best{0, 0};
  double best_v = score.at(0, 0, 0);
  for (int r = 0; r < score.height(); ++r) {
    for (int q = 0; q < score.width(); ++q) {
      if (score.at(0, r, q) > best_v) {
        best_v = score.at(0, r, q);
        best = {r, q};
      }
    }
  }
  return best;
}

FeatureMap gaussian_label(GridPos center, double sigma, int height, int width) {
  return gaussian_label_at(center.row, center.col, sigma, height, width);
}

FeatureMap gaussian_label_at(double row, double col, double sigma, int height,
                             int width) {
  if (sigma <= 0.0) throw PreconditionError("gaussian_label: sigma must be > 0");
  FeatureMap out(1, height, width);
  for (int r = 0; r < height; ++r) {
    for (int q = 0; q < width; ++q) {
      const double d2 = (r - row) * (r - row) + (q - col) * (q - col);
      out.at(0, r, q) = std::exp(-d2 / (2.0 * sigma * sigma));
    }
  }
  return out;
}

FeatureMap correlate(const FeatureMap& filter, const FeatureMap& feature) {
  if (filter.channels() != feature.channels()) {
    throw ShapeError("correlate: filter " + filter.shape_string() + " vs feature " +
                     feature.shape_string());
  }
  if (filter.height() > feature.height() || filter.width() > feature.width()) {
    throw ShapeError("correlate: filter " + filter.shape_string() +
                     " larger than feature " + feature.shape_string());
  }
  const int kh = filter.height();
  const int kw = filter.width();
  const int w = feature.width();
  const int vh = feature.height() - kh + 1;
  const int vw = w - kw + 1;
  FeatureMap out(1, feature.height(), w);
  // Every output accumulates its terms in (channel, u, v) order.
  for (int c = 0; c < feature.channels(); ++c) {
    const double* plane = feature.channel(c).data();
    for (int u = 0; u < kh; ++u) {
      for (int v = 0; v < kw; ++v) {
        const double k = filter.at(c, u, v);
        for (int r = 0; r < vh; ++r) {
          const double* src = plane + static_cast<std::size_t>(r + u) * w + v;
          double* dst = &out.at(0, r + kh / 2, kw / 2);
          for (int q = 0; q < vw; ++q) dst[q] += k * src[q];
        }
      }
    }
  }
  return out;
}

FeatureMap correlate_backward_feature(const FeatureMap& filter,
                                      const FeatureMap& upstream, int height,
                                      int width) {
  const int kh = filter.height();
  const int kw = filter.width();
  const int vh = height - kh + 1;
  const int vw = width - kw + 1;
  FeatureMap out(filter.channels(), height, width);
  for (int c = 0; c < filter.channels(); ++c) {
    for (int u = 0; u < kh; ++u) {
      for (int v = 0; v < kw; ++v) {
        const double k = filter.at(c, u, v);
        for (int r = 0; r < vh; ++r) {
          const double* g = upstream.data().data() +
                            static_cast<std::size_t>(r + kh / 2) * upstream.width() + kw / 2;
          double* dst = &out.at(c, r + u, v);
          for (int q = 0; q < vw; ++q) dst[q] += k * g[q];
        }
      }
    }
  }
  return out;
}

FeatureMap correlate_backward_filter(const FeatureMap& feature,
                                     const FeatureMap& upstream, int kernel_h,
                                     int kernel_w) {
  const int w = feature.width();
  const int vh = feature.height() - kernel_h + 1;
  const int vw = w - kernel_w + 1;
  FeatureMap out(feature.channels(), kernel_h, kernel_w);
  for (int c = 0; c < feature.channels(); ++c) {
    const double* plane = feature.channel(c).data();
    for (int u = 0; u < kernel_h; ++u) {
      for (int v = 0; v < kernel_w; ++v) {
        double s = 0.0;
        for (int r = 0; r < vh; ++r) {
          const double* g = upstream.data().data() +
                            static_cast<std::size_t>(r + kernel_h / 2) * upstream.width() +
                            kernel_w / 2;
          const double* src = plane + static_cast<std::size_t>(r + u) * w + v;
          for (int q = 0; q < vw; ++q) s += g[q] * src[q];
        }
        out.at(c, u, v) = s;
      }
    }
  }
  return out;
}

namespace {

// Zeroes the border cells that a k x k valid correlation cannot reach.
void zero_border(FeatureMap& m, int kh, int kw) {
  for (int r = 0; r < m.height(); ++r) {
    for (int q = 0; q < m.width(); ++q) {
      const bool valid = r >= kh / 2 && r < m.height() - (kh - 1 - kh / 2) &&
                         q >= kw / 2 && q < m.width() - (kw - 1 - kw / 2);
      if (!valid) m.at(0, r, q) = 0.0;
    }
  }
}

// Residual filter * f - y restricted to the valid region (zero elsewhere).
FeatureMap residual(const FeatureMap& weights, const FilterSample& s) {
  FeatureMap out = correlate(weights, s.feature);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= s.label.data()[i];
  zero_border(out, weights.height(), weights.width());
  return out;
}

void check_samples(std::span<const FilterSample> samples) {
  if (samples.empty()) throw PreconditionError("fit_filter needs at least one sample");
  for (const FilterSample& s : samples) {
    if (s.label.channels() != 1 || s.label.height() != s.feature.height() ||
        s.label.width() != s.feature.width() ||
        !s.feature.same_shape(samples[0].feature)) {
      throw ShapeError("fit_filter: sample feature " + s.feature.shape_string() +
                       " / label " + s.label.shape_string() + " mismatch");
    }
  }
}

}  // namespace

double filter_objective(const FeatureMap& weights,
                        std::span<const FilterSample> samples, double lambda) {
  double j = lambda * dot(weights, weights);
  for (const FilterSample& s : samples) {
    const FeatureMap res = residual(weights, s);
    j += dot(res, res);
  }
  return j;
}

OnlineFilter fit_filter(std::span<const FilterSample> samples, double lambda,
                        const FitOptions& options,
                        std::vector<double>* objective_trace,
                        const FeatureMap* warm_start) {
  check_samples(samples);
  if (lambda <= 0.0) throw PreconditionError("fit_filter: lambda must be > 0");
  const int channels = samples[0].feature.channels();
  const int k = options.kernel;
  FeatureMap w = warm_start ? *warm_start : FeatureMap(channels, k, k);
  if (w.channels() != channels || w.height() != k || w.width() != k) {
    throw ShapeError("fit_filter: warm start " + w.shape_string());
  }

  // Residuals are linear in the filter, so they are updated in place along
  // the search direction instead of being recomputed.
  std::vector<FeatureMap> res;
  res.reserve(samples.size());
  for (const FilterSample& s : samples) res.push_back(residual(w, s));
  auto objective = [&](double step, const std::vector<FeatureMap>& ag, const FeatureMap& g) {
    double total = 0.0;
    for (std::size_t n = 0; n < res.size(); ++n) {
      for (std::size_t i = 0; i < res[n].size(); ++i) {
        const double v = res[n].data()[i] - step * ag[n].data()[i];
        total += v * v;
      }
    }
    double reg = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double v = w.data()[i] - step * g.data()[i];
      reg += v * v;
    }
    return total + lambda * reg;
  };

  double j = filter_objective(w, samples, lambda);
  if (objective_trace) objective_trace->push_back(j);
  std::vector<FeatureMap> ap(samples.size());
  FeatureMap dir;
  FeatureMap g_prev;
  for (int it = 0; it < options.iterations; ++it) {
    // Half-gradient: sum_s A_s^T r_s + lambda w.
    FeatureMap g = w;
    for (double& v : g.data()) v *= lambda;
    for (std::size_t n = 0; n < samples.size(); ++n) {
      const FeatureMap gs = correlate_backward_filter(samples[n].feature, res[n], k, k);
      for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] += gs.data()[i];
    }
    const double gg = dot(g, g);
    if (gg == 0.0 || !std::isfinite(gg)) break;
    // Polak-Ribiere direction, restarted whenever it stops being a descent
    // direction.
    if (dir.empty()) {
      dir = g;
    } else {
      const double beta = std::max(0.0, (gg - dot(g, g_prev)) / dot(g_prev, g_prev));
      dir = axpby(1.0, g, beta, dir);
      if (dot(g, dir) <= 0.0) dir = g;
    }
    double curv = lambda * dot(dir, dir);
    for (std::size_t n = 0; n < samples.size(); ++n) {
      ap[n] = correlate(dir, samples[n].feature);
      curv += dot(ap[n], ap[n]);
    }
    if (curv <= 0.0) break;
    double step = options.learning_rate * dot(g, dir) / curv;
    double jn = objective(step, ap, dir);
    int halvings = 0;
    while (!(jn <= j) && halvings < 30) {
      step *= 0.5;
      jn = objective(step, ap, dir);
      ++halvings;
    }
    if (!(jn <= j)) break;
    w = axpby(1.0, w, -step, dir);
    for (std::size_t n = 0; n < res.size(); ++n) {
      for (std::size_t i = 0; i < res[n].size(); ++i) res[n].data()[i] -= step * ap[n].data()[i];
    }
    j = jn;
    g_prev = std::move(g);
    if (objective_trace) objective_trace->push_back(j);
  }
  if (!w.all_finite()) throw NumericError("fit_filter produced non-finite weights");
  return {std::move(w), lambda, options.learning_rate};
}

FeatureMap score(const OnlineFilter& filter, const FeatureMap& feature) {
  return correlate(filter.weights, feature);
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Location locate(const FeatureMap& score_map) {
  const GridPos pos = argmax_position(score_map);
  double mean = 0.0;
  for (double v : score_map.data()) mean += v;
  mean /= static_cast<double>(score_map.size());
  return {pos, logistic(score_map.at(0, pos.row, pos.col) - mean)};
}

}  // namespace treg::classifier
