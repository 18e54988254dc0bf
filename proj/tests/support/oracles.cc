#include "oracles.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace treg::testing {

FeatureMap random_map(Rng& rng, int channels, int height, int width, double lo,
                      double hi) {
  FeatureMap m(channels, height, width);
  for (double& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

PointwiseLinear random_layer(Rng& rng, int out, int in, bool with_bias) {
  PointwiseLinear l(out, in, with_bias);
  for (double& v : l.weights) v = rng.uniform(-1.0, 1.0);
  for (double& v : l.bias) v = rng.uniform(-1.0, 1.0);
  return l;
}

attention::StackedTemplates random_templates(Rng& rng, int count, int channels,
                                             int size) {
  std::vector<FeatureMap> entries;
  for (int k = 0; k < count; ++k) entries.push_back(random_map(rng, channels, size, size));
  return attention::StackedTemplates(std::move(entries));
}

FeatureMap ref_pointwise(const PointwiseLinear& layer, const FeatureMap& map) {
  FeatureMap out(layer.out_channels, map.height(), map.width());
  for (int r = 0; r < map.height(); ++r) {
    for (int c = 0; c < map.width(); ++c) {
      for (int o = 0; o < layer.out_channels; ++o) {
        double s = layer.has_bias() ? layer.bias[o] : 0.0;
        for (int i = 0; i < layer.in_channels; ++i) s += layer.w(o, i) * map.at(i, r, c);
        out.at(o, r, c) = s;
      }
    }
  }
  return out;
}

namespace {

std::vector<double> encode(const PointwiseLinear& layer, const FeatureMap& map, int r,
                           int c) {
  std::vector<double> v(layer.out_channels, 0.0);
  for (int o = 0; o < layer.out_channels; ++o) {
    for (int i = 0; i < layer.in_channels; ++i) v[o] += layer.w(o, i) * map.at(i, r, c);
  }
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Shared body of the mean and softmax aggregations.
FeatureMap aggregate(const FeatureMap& search, const attention::StackedTemplates& templates,
                     const attention::AttentionParams& p, bool softmax, bool average) {
  const int d = p.embed();
  const int channels = search.channels();
  FeatureMap out(channels, search.height(), search.width());
  for (int r = 0; r < search.height(); ++r) {
    for (int c = 0; c < search.width(); ++c) {
      const std::vector<double> q = encode(p.theta, search, r, c);
      std::vector<double> weights;
      std::vector<std::vector<double>> values;
      for (int k = 0; k < templates.count(); ++k) {
        const FeatureMap& t = templates.entry(k);
        for (int tr = 0; tr < t.height(); ++tr) {
          for (int tc = 0; tc < t.width(); ++tc) {
            weights.push_back(dot(q, encode(p.phi, t, tr, tc)));
            values.push_back(encode(p.omega, t, tr, tc));
          }
        }
      }
      const double n = static_cast<double>(weights.size());
      if (softmax) {
        const double mx = *std::max_element(weights.begin(), weights.end());
        double z = 0.0;
        for (double& w : weights) {
          w = std::exp(w - mx);
          z += w;
        }
        for (double& w : weights) w /= z;
      } else {
        for (double& w : weights) w /= n;
      }
      std::vector<double> agg(d, 0.0);
      for (std::size_t j = 0; j < weights.size(); ++j) {
        for (int e = 0; e < d; ++e) agg[e] += weights[j] * values[j][e];
      }
      for (int o = 0; o < channels; ++o) {
        double s = 0.0;
        for (int e = 0; e < d; ++e) s += p.w_out.w(o, e) * agg[e];
        const double y = s + search.at(o, r, c);
        out.at(o, r, c) = average ? 0.5 * y : y;
      }
    }
  }
  return out;
}

}  // namespace

FeatureMap ref_transform(const FeatureMap& search,
                         const attention::StackedTemplates& templates,
                         const attention::AttentionParams& params, bool average_residual) {
  return aggregate(search, templates, params, false, average_residual);
}

FeatureMap softmax_transform(const FeatureMap& search,
                             const attention::StackedTemplates& templates,
                             const attention::AttentionParams& params) {
  return aggregate(search, templates, params, true, false);
}

FeatureMap ref_attention_map(const FeatureMap& search,
                             const attention::StackedTemplates& templates,
                             const attention::AttentionParams& params) {
  FeatureMap out(1, search.height(), search.width());
  for (int r = 0; r < search.height(); ++r) {
    for (int c = 0; c < search.width(); ++c) {
      const std::vector<double> q = encode(params.theta, search, r, c);
      double s = 0.0;
      int n = 0;
      for (const FeatureMap& t : templates.entries()) {
        for (int tr = 0; tr < t.height(); ++tr) {
          for (int tc = 0; tc < t.width(); ++tc) {
            s += dot(q, encode(params.phi, t, tr, tc));
            ++n;
          }
        }
      }
      out.at(0, r, c) = s / n;
    }
  }
  return out;
}

FeatureMap ref_roi_pool(const FeatureMap& map, const BBox& box, int out_size) {
  const Corners b = box.corners();
  const double bw = box.w / out_size;
  const double bh = box.h / out_size;
  FeatureMap out(map.channels(), out_size, out_size);
  for (int by = 0; by < out_size; ++by) {
    for (int bx = 0; bx < out_size; ++bx) {
      const double x0 = b.x1 + bx * bw;
      const double x1 = b.x1 + (bx + 1) * bw;
      const double y0 = b.y1 + by * bh;
      const double y1 = b.y1 + (by + 1) * bh;
      for (int ch = 0; ch < map.channels(); ++ch) {
        double s = 0.0;
        int n = 0;
        for (int r = 0; r < map.height(); ++r) {
          for (int c = 0; c < map.width(); ++c) {
            const double cx = c + 0.5;
            const double cy = r + 0.5;
            if (cx >= x0 && cx < x1 && cy >= y0 && cy < y1) {
              s += map.at(ch, r, c);
              ++n;
            }
          }
        }
        out.at(ch, by, bx) = n > 0 ? s / n : std::numeric_limits<double>::quiet_NaN();
      }
    }
  }
  return out;
}

FeatureMap ref_correlate(const FeatureMap& filter, const FeatureMap& feature) {
  const int kh = filter.height();
  const int kw = filter.width();
  FeatureMap out(1, feature.height(), feature.width());
  for (int r = 0; r + kh <= feature.height(); ++r) {
    for (int c = 0; c + kw <= feature.width(); ++c) {
      double s = 0.0;
      for (int ch = 0; ch < feature.channels(); ++ch) {
        for (int u = 0; u < kh; ++u) {
          for (int v = 0; v < kw; ++v) s += filter.at(ch, u, v) * feature.at(ch, r + u, c + v);
        }
      }
      out.at(0, r + kh / 2, c + kw / 2) = s;
    }
  }
  return out;
}

FeatureMap ref_depthwise(const FeatureMap& search, const FeatureMap& templ) {
  const int kh = templ.height();
  const int kw = templ.width();
  FeatureMap out(search.channels(), search.height(), search.width());
  for (int ch = 0; ch < search.channels(); ++ch) {
    for (int r = 0; r + kh <= search.height(); ++r) {
      for (int c = 0; c + kw <= search.width(); ++c) {
        double s = 0.0;
        for (int u = 0; u < kh; ++u) {
          for (int v = 0; v < kw; ++v) s += templ.at(ch, u, v) * search.at(ch, r + u, c + v);
        }
        out.at(ch, r + kh / 2, c + kw / 2) = s;
      }
    }
  }
  return out;
}

FeatureMap ref_pixel_corr_weights(const FeatureMap& search,
                                  const attention::StackedTemplates& templates) {
  FeatureMap out(1, search.height(), search.width());
  for (int r = 0; r < search.height(); ++r) {
    for (int c = 0; c < search.width(); ++c) {
      const std::vector<double> x = search.cell(r, c);
      const double nx = std::sqrt(dot(x, x));
      double best = -std::numeric_limits<double>::infinity();
      for (const FeatureMap& t : templates.entries()) {
        for (int tr = 0; tr < t.height(); ++tr) {
          for (int tc = 0; tc < t.width(); ++tc) {
            const std::vector<double> y = t.cell(tr, tc);
            const double ny = std::sqrt(dot(y, y));
            const double cosv = nx > 0.0 && ny > 0.0 ? dot(x, y) / (nx * ny) : 0.0;
            best = std::max(best, cosv);
          }
        }
      }
      out.at(0, r, c) = std::max(best, 0.0);
    }
  }
  return out;
}

FeatureMap ref_head(const FeatureMap& feature, const head::HeadParams& params) {
  FeatureMap h1 = ref_pointwise(params.l1, feature);
  for (double& v : h1.data()) v = std::max(v, 0.0);
  FeatureMap h2 = ref_pointwise(params.l2, h1);
  for (double& v : h2.data()) v = std::max(v, 0.0);
  FeatureMap out = ref_pointwise(params.l3, h2);
  for (double& v : out.data()) {
    v = std::exp(std::clamp(v, -head::kMaxLogOffset, head::kMaxLogOffset));
  }
  return out;
}

double ref_success_auc(const std::vector<double>& ious) {
  long hits = 0;
  for (double v : ious) {
    for (int k = 0; k <= 20; ++k) {
      if (v > k / 20.0) ++hits;
    }
  }
  return static_cast<double>(hits) / (21.0 * static_cast<double>(ious.size()));
}

double ref_precision(const std::vector<double>& errors, double threshold) {
  long hits = 0;
  for (double e : errors) {
    if (e <= threshold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(errors.size());
}

}  // namespace treg::testing

namespace treg::testing {

namespace {

struct ModelEntry {
  double confidence;
  long frame;
};

}  // namespace

std::string model_check_queue(int sequences, int max_ops, std::uint64_t seed) {
  Rng rng(seed);
  const FeatureMap first = random_map(rng, 2, 12, 12);
  for (int s = 0; s < sequences; ++s) {
    QueueConfig cfg;
    cfg.update_interval = rng.uniform_int(1, 6);
    cfg.policy = rng.bernoulli(0.5) ? CommitPolicy::Confidence : CommitPolicy::FixedInterval;
    TemplateQueue q = TemplateQueue::init_static(first, BBox{6.0, 6.0, 5.0, 4.0},
                                                 rng.next_u64(), cfg);
    const std::vector<TemplateEntry> statics = q.statics();
    std::vector<ModelEntry> bar;
    std::vector<ModelEntry> online;
    long frame = 0;
    const int ops = rng.uniform_int(1, max_ops);
    auto fail = [&](const std::string& what) {
      return "sequence " + std::to_string(s) + ", frame " + std::to_string(frame) + ": " + what;
    };
    for (int op = 0; op < ops; ++op) {
      const int kind = rng.uniform_int(0, 3);
      if (kind <= 1) {
        frame += rng.uniform_int(1, 3);
        // Few distinct levels so that ties occur.
        const double conf = rng.uniform_int(0, 4) / 4.0;
        FeatureMap f(2, 5, 5, static_cast<double>(frame));
        q.observe(frame, f, conf);
        bar.push_back({conf, frame});
      } else if (kind == 2) {
        const auto committed = q.maybe_commit(frame);
        const bool boundary = frame % cfg.update_interval == 0 && !bar.empty();
        if (committed.has_value() != boundary) return fail("commit at a non-boundary or missed");
        if (boundary) {
          std::size_t pick = bar.size() - 1;
          if (cfg.policy == CommitPolicy::Confidence) {
            for (std::size_t i = 0; i < bar.size(); ++i) {
              if (bar[i].confidence >= bar[pick].confidence) pick = i;
            }
            for (const ModelEntry& b : bar) {
              if (b.confidence > committed->confidence) return fail("committed entry is not the argmax");
            }
          }
          if (committed->frame_index != bar[pick].frame) return fail("wrong bar sample committed");
          online.push_back(bar[pick]);
          if (online.size() > 4) online.erase(online.begin());
          bar.clear();
        }
      } else {
        const attention::StackedTemplates st = q.as_stacked();
        if (st.cells() != st.count() * 25) return fail("N != t * 25");
      }
      if (q.statics().size() != 3) return fail("statics != 3");
      if (q.online().size() > 4) return fail("online > 4");
      if (q.total() > 7) return fail("total > 7");
      if (q.samples_bar().size() != bar.size()) return fail("bar length differs from model");
      if (q.online().size() != online.size()) return fail("online count differs from model");
      for (std::size_t i = 0; i < online.size(); ++i) {
        if (q.online()[i].frame_index != online[i].frame) return fail("eviction order differs");
      }
      for (std::size_t i = 0; i < statics.size(); ++i) {
        if (!(q.statics()[i].features == statics[i].features)) return fail("a static entry changed");
      }
    }
  }
  return {};
}

}  // namespace treg::testing
