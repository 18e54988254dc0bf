#include "treg/model.h"

#include <algorithm>
#include <cmath>

#include "treg/errors.h"
#include "treg/random.h"

namespace treg {

namespace {

std::uint32_t u32(int v) { return static_cast<std::uint32_t>(v); }

template <typename Params, typename Out, typename Span>
void collect(Params& p, std::vector<Out>& out) {
  auto layer = [&](const std::string& name, auto& l) {
    out.push_back({name + "/w", {u32(l.out_channels), u32(l.in_channels)},
                   Span(l.weights)});
    if (l.has_bias()) out.push_back({name + "/b", {u32(l.out_channels)}, Span(l.bias)});
  };
  auto attn = [&](const std::string& prefix, auto& a) {
    layer(prefix + "/theta", a.theta);
    layer(prefix + "/phi", a.phi);
    layer(prefix + "/omega", a.omega);
    layer(prefix + "/w_out", a.w_out);
  };
  attn("attention", p.attention);
  layer("head/l1", p.head.l1);
  layer("head/l2", p.head.l2);
  layer("head/l3", p.head.l3);
  layer("cls", p.cls);
  if (p.cls_attention) attn("cls_attention", *p.cls_attention);
}

}  // namespace

ModelParams ModelParams::init(const FeatureConfig& features, FusionKind fusion,
                              bool tat_cls, std::uint64_t seed, int hidden,
                              int cls_channels) {
  ModelParams p;
  p.fusion = fusion;
  p.tat_cls = tat_cls;
  p.features = features;
  p.shape.channels = features.channels();
  p.shape.embed = attention::default_embed_width(p.shape.channels);
  p.shape.hidden = hidden;
  p.shape.cls_channels = cls_channels;
  // Separate streams so that adding a parameter group does not shift others.
  Rng attn_rng(derive_seed(seed, 1));
  Rng head_rng(derive_seed(seed, 2));
  Rng cls_rng(derive_seed(seed, 3));
  p.attention = attention::AttentionParams::random(p.shape.channels, p.shape.embed, attn_rng);
  p.head = head::HeadParams::random(p.shape.channels, hidden, head_rng);
  // Start the offsets near half the nominal target extent in crop pixels.
  const double half_extent = features.crop_px / (2.0 * features.search_factor);
  std::fill(p.head.l3.bias.begin(), p.head.l3.bias.end(), std::log(half_extent));
  p.cls = PointwiseLinear::random(cls_channels, p.shape.channels, true, cls_rng);
  if (tat_cls) {
    Rng cls_attn_rng(derive_seed(seed, 4));
    p.cls_attention = attention::AttentionParams::random(p.shape.channels, p.shape.embed,
                                                         cls_attn_rng);
  }
  return p;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  for (Tensor& t : z.tensors()) std::fill(t.values.begin(), t.values.end(), 0.0);
  return z;
}

std::vector<ModelParams::Tensor> ModelParams::tensors() {
  std::vector<Tensor> out;
  collect<ModelParams, Tensor, std::span<double>>(*this, out);
  return out;
}

std::vector<ModelParams::ConstTensor> ModelParams::tensors() const {
  std::vector<ConstTensor> out;
  collect<const ModelParams, ConstTensor, std::span<const double>>(*this, out);
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const ConstTensor& t : tensors()) n += t.values.size();
  return n;
}

std::vector<double> ModelParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const ConstTensor& t : tensors()) flat.insert(flat.end(), t.values.begin(), t.values.end());
  return flat;
}

void ModelParams::unflatten(std::span<const double> flat) {
  if (flat.size() != parameter_count()) {
    throw ShapeError("unflatten: expected " + std::to_string(parameter_count()) +
                     " values, got " + std::to_string(flat.size()));
  }
  std::size_t k = 0;
  for (Tensor& t : tensors()) {
    for (double& v : t.values) v = flat[k++];
  }
}

Checkpoint ModelParams::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.add_scalar("meta/format_version", 1.0);
  ckpt.add_scalar("meta/fusion", static_cast<double>(static_cast<int>(fusion)));
  ckpt.add_scalar("meta/tat_cls", tat_cls ? 1.0 : 0.0);
  ckpt.add_scalar("meta/average_residual", average_residual ? 1.0 : 0.0);
  const double shape_v[] = {static_cast<double>(shape.channels), static_cast<double>(shape.embed),
                            static_cast<double>(shape.hidden),
                            static_cast<double>(shape.cls_channels)};
  ckpt.add("meta/shape", {4}, shape_v);
  const double feat_v[] = {static_cast<double>(features.crop_px),
                           static_cast<double>(features.stride), features.search_factor};
  ckpt.add("meta/features", {3}, feat_v);
  std::vector<double> dist(features.distances.begin(), features.distances.end());
  ckpt.add("meta/distances", {u32(static_cast<int>(dist.size()))}, dist);
  for (const ConstTensor& t : tensors()) ckpt.add(t.name, t.dims, t.values);
  return ckpt;
}

ModelParams ModelParams::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.scalar("meta/format_version") != 1.0) {
    throw ConfigError("unsupported checkpoint format version");
  }
  const int fusion_code = static_cast<int>(ckpt.scalar("meta/fusion"));
  if (fusion_code < 0 || fusion_code > 3) throw ConfigError("bad fusion code in checkpoint");
  const std::vector<double> shape_v = ckpt.get("meta/shape").as_double();
  const std::vector<double> feat_v = ckpt.get("meta/features").as_double();
  const std::vector<double> dist = ckpt.get("meta/distances").as_double();
  if (shape_v.size() != 4 || feat_v.size() != 3) throw ConfigError("malformed checkpoint meta");

  FeatureConfig features;
  features.crop_px = static_cast<int>(feat_v[0]);
  features.stride = static_cast<int>(feat_v[1]);
  features.search_factor = feat_v[2];
  features.distances.assign(dist.begin(), dist.end());

  ModelParams p = init(features, static_cast<FusionKind>(fusion_code),
                       ckpt.scalar("meta/tat_cls") != 0.0, 0,
                       static_cast<int>(shape_v[2]), static_cast<int>(shape_v[3]));
  if (p.shape.channels != static_cast<int>(shape_v[0]) ||
      p.shape.embed != static_cast<int>(shape_v[1])) {
    throw ConfigError("checkpoint shape does not match its feature configuration");
  }
  p.average_residual = ckpt.scalar("meta/average_residual") != 0.0;
  for (Tensor& t : p.tensors()) {
    const NamedTensor& rec = ckpt.get(t.name);
    if (rec.dims != t.dims) throw ConfigError("checkpoint record '" + t.name + "' has wrong shape");
    for (std::size_t i = 0; i < t.values.size(); ++i) t.values[i] = rec.data[i];
  }
  return p;
}

void ModelParams::save(const std::filesystem::path& path) const {
  to_checkpoint().write(path);
}

ModelParams ModelParams::load(const std::filesystem::path& path) {
  return from_checkpoint(Checkpoint::read(path));
}

FeatureMap regression_features(const ModelParams& params, const FeatureMap& search,
                               const attention::StackedTemplates& templates) {
  return fusion::apply(params.fusion, search, templates, params.attention,
                       {params.average_residual});
}

FeatureMap classification_base(const ModelParams& params, const FeatureMap& search,
                               const attention::StackedTemplates& templates) {
  if (!params.tat_cls) return search;
  if (!params.cls_attention) throw ConfigError("tat_cls set without classification attention");
  return attention::transform(search, templates, *params.cls_attention,
                              {params.average_residual});
}

FeatureMap classification_features(const ModelParams& params, const FeatureMap& search,
                                   const attention::StackedTemplates& templates) {
  return pointwise_apply(params.cls, classification_base(params, search, templates));
}

}  // namespace treg
