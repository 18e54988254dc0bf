#include "treg/target_attention.h"

#include <algorithm>
#include <string>

#include "treg/errors.h"

namespace treg::attention {

namespace {

std::string dims(const PointwiseLinear& l) {
  return std::to_string(l.out_channels) + "x" + std::to_string(l.in_channels);
}

void check_inputs(const FeatureMap& search, const StackedTemplates& templates,
                  const AttentionParams& params) {
  params.validate();
  if (templates.empty()) {
    throw PreconditionError("target attention needs a non-empty template queue");
  }
  if (search.channels() != params.channels() ||
      templates.channels() != params.channels()) {
    throw ShapeError("target attention: search " + search.shape_string() +
                     ", templates " + std::to_string(templates.channels()) +
                     " channels, encoders expect " +
                     std::to_string(params.channels()));
  }
}

// Bitwise-identical entries collapse into one group with a multiplicity.
// Aggregating per group with weight multiplicity / t keeps the output
// bit-identical when the queue is duplicated.
struct Group {
  int representative;
  int multiplicity;
};

std::vector<Group> group_entries(const StackedTemplates& templates) {
  std::vector<Group> groups;
  for (int k = 0; k < templates.count(); ++k) {
    bool merged = false;
    for (Group& g : groups) {
      if (templates.entry(g.representative) == templates.entry(k)) {
        ++g.multiplicity;
        merged = true;
        break;
      }
    }
    if (!merged) groups.push_back({k, 1});
  }
  return groups;
}

// M = (1/N) sum_k sum_j omega(t_j) phi(t_j)^T as a D x D pointwise layer.
PointwiseLinear aggregation_matrix(const StackedTemplates& templates,
                                   const AttentionParams& params) {
  const int d = params.embed();
  const int cells = templates.height() * templates.width();
  PointwiseLinear m(d, d, false);
  for (const Group& g : group_entries(templates)) {
    const FeatureMap& t = templates.entry(g.representative);
    const FeatureMap keys = pointwise_apply(params.phi, t);
    const FeatureMap values = pointwise_apply(params.omega, t);
    const double weight =
        static_cast<double>(g.multiplicity) / templates.count();
    for (int a = 0; a < d; ++a) {
      std::span<const double> va = values.channel(a);
      for (int b = 0; b < d; ++b) {
        std::span<const double> kb = keys.channel(b);
        double s = 0.0;
        for (int j = 0; j < cells; ++j) s += va[j] * kb[j];
        m.w(a, b) += weight * (s / cells);
      }
    }
  }
  return m;
}

}  // namespace

AttentionParams AttentionParams::random(int channels, int embed, Rng& rng) {
  AttentionParams p;
  p.theta = PointwiseLinear::random(embed, channels, false, rng);
  p.phi = PointwiseLinear::random(embed, channels, false, rng);
  p.omega = PointwiseLinear::random(embed, channels, false, rng);
  p.w_out = PointwiseLinear::random(channels, embed, false, rng);
  return p;
}

AttentionParams AttentionParams::zeros(int channels, int embed) {
  return {PointwiseLinear(embed, channels, false),
          PointwiseLinear(embed, channels, false),
          PointwiseLinear(embed, channels, false),
          PointwiseLinear(channels, embed, false)};
}

void AttentionParams::validate() const {
  const int c = theta.in_channels;
  const int d = theta.out_channels;
  if (phi.in_channels != c || omega.in_channels != c ||
      phi.out_channels != d || omega.out_channels != d ||
      w_out.in_channels != d || w_out.out_channels != c) {
    throw ShapeError("attention encoders do not compose: theta " + dims(theta) +
                     ", phi " + dims(phi) + ", omega " + dims(omega) +
                     ", W " + dims(w_out));
  }
  if (theta.has_bias() || phi.has_bias() || omega.has_bias() ||
      w_out.has_bias()) {
    throw ShapeError("attention encoders must be bias-free");
  }
}

int default_embed_width(int channels) { return std::max(8, channels / 2); }

StackedTemplates::StackedTemplates(std::vector<FeatureMap> entries)
    : entries_(std::move(entries)) {
  for (const FeatureMap& e : entries_) {
    if (e.channels() != entries_[0].channels() ||
        e.height() != entries_[0].height() ||
        e.width() != entries_[0].width()) {
      throw ShapeError("stacked templates must share one shape: " +
                       entries_[0].shape_string() + " vs " + e.shape_string());
    }
  }
  cells_ = count() * height() * width();
}

double affinity(std::span<const double> query_cell,
                std::span<const double> key_cell,
                const AttentionParams& params) {
  if (query_cell.size() != key_cell.size()) {
    throw ShapeError("affinity: query has " + std::to_string(query_cell.size()) +
                     " entries, key has " + std::to_string(key_cell.size()));
  }
  const std::vector<double> q = params.theta.apply_cell(query_cell);
  const std::vector<double> k = params.phi.apply_cell(key_cell);
  double s = 0.0;
  for (std::size_t a = 0; a < q.size(); ++a) s += q[a] * k[a];
  return s;
}

FeatureMap transform(const FeatureMap& search, const StackedTemplates& templates,
                     const AttentionParams& params,
                     const TransformOptions& options) {
  check_inputs(search, templates, params);
  const PointwiseLinear m = aggregation_matrix(templates, params);
  const FeatureMap queries = pointwise_apply(params.theta, search);
  const FeatureMap aggregated = pointwise_apply(m, queries);
  FeatureMap out = pointwise_apply(params.w_out, aggregated);
  const double scale = options.average_residual ? 0.5 : 1.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = scale * (out.data()[i] + search.data()[i]);
  }
  return out;
}

AttentionGrads transform_backward(const FeatureMap& search,
                                  const StackedTemplates& templates,
                                  const AttentionParams& params,
                                  const FeatureMap& upstream_grad,
                                  const TransformOptions& options) {
  check_inputs(search, templates, params);
  if (!upstream_grad.same_shape(search)) {
    throw ShapeError("transform_backward: upstream " +
                     upstream_grad.shape_string() + " vs output " +
                     search.shape_string());
  }
  const double scale = options.average_residual ? 0.5 : 1.0;
  const int d = params.embed();
  const int cells = templates.height() * templates.width();
  const double inv_n = 1.0 / templates.cells();

  const PointwiseLinear m = aggregation_matrix(templates, params);
  const FeatureMap queries = pointwise_apply(params.theta, search);
  const FeatureMap aggregated = pointwise_apply(m, queries);

  FeatureMap g = upstream_grad;
  if (scale != 1.0) {
    for (double& v : g.data()) v *= scale;
  }

  AttentionGrads out;
  PointwiseGrads gw = pointwise_backward(params.w_out, aggregated, g);
  out.d_w_out = std::move(gw.d_weights);
  PointwiseGrads gm = pointwise_backward(m, queries, gw.d_input);
  // gm.d_weights is dL/dM; gm.d_input is dL/dq.
  PointwiseGrads gt = pointwise_backward(params.theta, search, gm.d_input);
  out.d_theta = std::move(gt.d_weights);
  out.d_search = std::move(gt.d_input);
  for (std::size_t i = 0; i < out.d_search.size(); ++i) {
    out.d_search.data()[i] += g.data()[i];
  }

  out.d_phi.assign(params.phi.weights.size(), 0.0);
  out.d_omega.assign(params.omega.weights.size(), 0.0);
  const std::vector<double>& dm = gm.d_weights;
  for (const FeatureMap& t : templates.entries()) {
    const FeatureMap keys = pointwise_apply(params.phi, t);
    const FeatureMap values = pointwise_apply(params.omega, t);
    FeatureMap d_keys(d, t.height(), t.width());
    FeatureMap d_values(d, t.height(), t.width());
    for (int j = 0; j < cells; ++j) {
      for (int a = 0; a < d; ++a) {
        double dv = 0.0;
        double dk = 0.0;
        for (int b = 0; b < d; ++b) {
          dv += dm[static_cast<std::size_t>(a) * d + b] * keys.data()[static_cast<std::size_t>(b) * cells + j];
          dk += dm[static_cast<std::size_t>(b) * d + a] * values.data()[static_cast<std::size_t>(b) * cells + j];
        }
        d_values.data()[static_cast<std::size_t>(a) * cells + j] = inv_n * dv;
        d_keys.data()[static_cast<std::size_t>(a) * cells + j] = inv_n * dk;
      }
    }
    PointwiseGrads gp = pointwise_backward(params.phi, t, d_keys);
    PointwiseGrads go = pointwise_backward(params.omega, t, d_values);
    for (std::size_t i = 0; i < out.d_phi.size(); ++i) out.d_phi[i] += gp.d_weights[i];
    for (std::size_t i = 0; i < out.d_omega.size(); ++i) out.d_omega[i] += go.d_weights[i];
    FeatureMap dt = gp.d_input;
    for (std::size_t i = 0; i < dt.size(); ++i) dt.data()[i] += go.d_input.data()[i];
    out.d_templates.push_back(std::move(dt));
  }
  return out;
}

FeatureMap attention_map(const FeatureMap& search,
                         const StackedTemplates& templates,
                         const AttentionParams& params) {
  check_inputs(search, templates, params);
  const int d = params.embed();
  const int cells = templates.height() * templates.width();
  std::vector<double> mean_key(d, 0.0);
  for (const Group& g : group_entries(templates)) {
    const FeatureMap keys = pointwise_apply(params.phi, templates.entry(g.representative));
    const double weight = static_cast<double>(g.multiplicity) / templates.count();
    for (int a = 0; a < d; ++a) {
      double s = 0.0;
      for (double v : keys.channel(a)) s += v;
      mean_key[a] += weight * (s / cells);
    }
  }
  const FeatureMap queries = pointwise_apply(params.theta, search);
  FeatureMap out(1, search.height(), search.width());
  for (int a = 0; a < d; ++a) {
    std::span<const double> q = queries.channel(a);
    for (int p = 0; p < search.plane_size(); ++p) out.data()[p] += q[p] * mean_key[a];
  }
  return out;
}

}  // namespace treg::attention
