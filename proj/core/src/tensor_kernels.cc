#include "treg/tensor_kernels.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "treg/errors.h"

namespace treg {

PointwiseLinear::PointwiseLinear(int out, int in, bool with_bias)
    : out_channels(out), in_channels(in) {
  if (out <= 0 || in <= 0) {
    throw ShapeError("PointwiseLinear needs positive sizes, got " +
                     std::to_string(out) + "x" + std::to_string(in));
  }
  weights.assign(static_cast<std::size_t>(out) * in, 0.0);
  if (with_bias) bias.assign(out, 0.0);
}

PointwiseLinear PointwiseLinear::identity(int n) {
  PointwiseLinear layer(n, n, false);
  for (int i = 0; i < n; ++i) layer.w(i, i) = 1.0;
  return layer;
}

PointwiseLinear PointwiseLinear::random(int out, int in, bool with_bias,
                                        Rng& rng) {
  PointwiseLinear layer(out, in, with_bias);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& v : layer.weights) v = rng.uniform(-bound, bound);
  for (double& v : layer.bias) v = rng.uniform(-bound, bound);
  return layer;
}

std::vector<double> PointwiseLinear::apply_cell(
    std::span<const double> x) const {
  if (static_cast<int>(x.size()) != in_channels) {
    throw ShapeError("pointwise layer expects " + std::to_string(in_channels) +
                     " channels, got " + std::to_string(x.size()));
  }
  std::vector<double> y(out_channels, 0.0);
  for (int o = 0; o < out_channels; ++o) {
    double s = 0.0;
    for (int i = 0; i < in_channels; ++i) s += w(o, i) * x[i];
    y[o] = has_bias() ? s + bias[o] : s;
  }
  return y;
}

FeatureMap pointwise_apply(const PointwiseLinear& layer, const FeatureMap& map) {
  if (layer.in_channels != map.channels()) {
    throw ShapeError("pointwise_apply: layer " +
                     std::to_string(layer.out_channels) + "x" +
                     std::to_string(layer.in_channels) + " vs map " +
                     map.shape_string());
  }
  const int plane = map.plane_size();
  FeatureMap out(layer.out_channels, map.height(), map.width());
  for (int o = 0; o < layer.out_channels; ++o) {
    std::span<double> dst = out.channel(o);
    for (int i = 0; i < layer.in_channels; ++i) {
      const double wi = layer.w(o, i);
      std::span<const double> src = map.channel(i);
      for (int p = 0; p < plane; ++p) dst[p] += wi * src[p];
    }
    if (layer.has_bias()) {
      for (int p = 0; p < plane; ++p) dst[p] += layer.bias[o];
    }
  }
  return out;
}

PointwiseGrads pointwise_backward(const PointwiseLinear& layer,
                                  const FeatureMap& map,
                                  const FeatureMap& upstream_grad) {
  if (layer.in_channels != map.channels() ||
      upstream_grad.channels() != layer.out_channels ||
      upstream_grad.height() != map.height() ||
      upstream_grad.width() != map.width()) {
    throw ShapeError("pointwise_backward: layer " +
                     std::to_string(layer.out_channels) + "x" +
                     std::to_string(layer.in_channels) + ", input " +
                     map.shape_string() + ", upstream " +
                     upstream_grad.shape_string());
  }
  const int plane = map.plane_size();
  PointwiseGrads g;
  g.d_weights.assign(layer.weights.size(), 0.0);
  g.d_bias.assign(layer.bias.size(), 0.0);
  g.d_input = FeatureMap(map.channels(), map.height(), map.width());
  for (int o = 0; o < layer.out_channels; ++o) {
    std::span<const double> up = upstream_grad.channel(o);
    for (int i = 0; i < layer.in_channels; ++i) {
      std::span<const double> src = map.channel(i);
      double s = 0.0;
      for (int p = 0; p < plane; ++p) s += up[p] * src[p];
      g.d_weights[static_cast<std::size_t>(o) * layer.in_channels + i] = s;
    }
    if (layer.has_bias()) {
      double s = 0.0;
      for (int p = 0; p < plane; ++p) s += up[p];
      g.d_bias[o] = s;
    }
  }
  for (int i = 0; i < layer.in_channels; ++i) {
    std::span<double> dst = g.d_input.channel(i);
    for (int o = 0; o < layer.out_channels; ++o) {
      const double wi = layer.w(o, i);
      std::span<const double> up = upstream_grad.channel(o);
      for (int p = 0; p < plane; ++p) dst[p] += wi * up[p];
    }
  }
  return g;
}

FeatureMap roi_pool(const FeatureMap& map, const BBox& box, int out_size) {
  if (out_size < 1) {
    throw PreconditionError("roi_pool: out_size must be >= 1, got " +
                            std::to_string(out_size));
  }
  if (!box.valid()) {
    throw PreconditionError("roi_pool: invalid box " + to_string(box));
  }
  const Corners b = box.corners();
  if (b.x2 <= 0.0 || b.y2 <= 0.0 || b.x1 >= map.width() ||
      b.y1 >= map.height()) {
    throw OutOfBoundsError("roi_pool: " + to_string(box) +
                           " lies outside map " + map.shape_string());
  }
  const int channels = map.channels();
  const double bin_w = box.w / out_size;
  const double bin_h = box.h / out_size;

  // Bin index of each covered cell along one axis (-1 = outside the box).
  auto bin_of = [out_size](double center, double lo, double hi, double step) {
    if (center < lo || center >= hi) return -1;
    int k = static_cast<int>(std::floor((center - lo) / step));
    return std::clamp(k, 0, out_size - 1);
  };
  std::vector<int> col_bin(map.width());
  std::vector<int> row_bin(map.height());
  for (int c = 0; c < map.width(); ++c) col_bin[c] = bin_of(c + 0.5, b.x1, b.x2, bin_w);
  for (int r = 0; r < map.height(); ++r) row_bin[r] = bin_of(r + 0.5, b.y1, b.y2, bin_h);

  FeatureMap out(channels, out_size, out_size);
  std::vector<int> counts(static_cast<std::size_t>(out_size) * out_size, 0);
  for (int r = 0; r < map.height(); ++r) {
    if (row_bin[r] < 0) continue;
    for (int c = 0; c < map.width(); ++c) {
      if (col_bin[c] < 0) continue;
      const int by = row_bin[r];
      const int bx = col_bin[c];
      ++counts[static_cast<std::size_t>(by) * out_size + bx];
      for (int ch = 0; ch < channels; ++ch) out.at(ch, by, bx) += map.at(ch, r, c);
    }
  }

  bool any_covered = false;
  for (int n : counts) any_covered = any_covered || n > 0;

  for (int by = 0; by < out_size; ++by) {
    for (int bx = 0; bx < out_size; ++bx) {
      const int n = counts[static_cast<std::size_t>(by) * out_size + bx];
      if (n > 0) {
        for (int ch = 0; ch < channels; ++ch) out.at(ch, by, bx) /= n;
        continue;
      }
      // Empty bin: nearest covered cell, or the nearest map cell when the box
      // covers no cell center at all. Ties go to the smaller row, then column.
      const double ux = b.x1 + (bx + 0.5) * bin_w;
      const double uy = b.y1 + (by + 0.5) * bin_h;
      double best = std::numeric_limits<double>::infinity();
      int best_r = 0;
      int best_c = 0;
      for (int r = 0; r < map.height(); ++r) {
        if (any_covered && row_bin[r] < 0) continue;
        for (int c = 0; c < map.width(); ++c) {
          if (any_covered && col_bin[c] < 0) continue;
          const double d = (c + 0.5 - ux) * (c + 0.5 - ux) +
                           (r + 0.5 - uy) * (r + 0.5 - uy);
          if (d < best) {
            best = d;
            best_r = r;
            best_c = c;
          }
        }
      }
      for (int ch = 0; ch < channels; ++ch) out.at(ch, by, bx) = map.at(ch, best_r, best_c);
    }
  }
  return out;
}

std::vector<double> finite_diff_grad(const ScalarFunction& f,
                                     std::span<const double> params,
                                     double eps) {
  std::vector<double> p(params.begin(), params.end());
  std::vector<double> grad(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double saved = p[k];
    p[k] = saved + eps;
    const double fp = f(p);
    p[k] = saved - eps;
    const double fm = f(p);
    p[k] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("finite_diff_grad: non-finite function value when "
                         "perturbing entry " + std::to_string(k));
    }
    grad[k] = (fp - fm) / (2.0 * eps);
  }
  return grad;
}

double relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("relative_error: lengths " + std::to_string(a.size()) +
                     " vs " + std::to_string(b.size()));
  }
  double diff = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(std::max(na, nb));
  if (denom == 0.0) return 0.0;
  return std::sqrt(diff) / denom;
}

}  // namespace treg
