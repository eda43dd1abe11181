// SPDX-License-Identifier: Apache-2.0

#include "gatefuse/gfa.hpp"

#include <cmath>
#include <stdexcept>

namespace gatefuse {

std::string to_string(ScaleKind kind) {
  switch (kind) {
    case ScaleKind::none: return "none";
    case ScaleKind::scalar_divide: return "scalar-divide";
    case ScaleKind::norm_to_amplitude: return "norm-to-amplitude";
    case ScaleKind::norm_then_divide: return "norm-then-divide";
  }
  return "unknown";
}

ScaleKind parse_scale_kind(const std::string& name) {
  if (name == "none") return ScaleKind::none;
  if (name == "scalar-divide") return ScaleKind::scalar_divide;
  if (name == "norm-to-amplitude") return ScaleKind::norm_to_amplitude;
  if (name == "norm-then-divide") return ScaleKind::norm_then_divide;
  throw std::invalid_argument("unknown scale mode '" + name + "'");
}

void ScaleMode::validate() const {
  if (!(divisor > 0.0) || !std::isfinite(divisor))
    throw std::invalid_argument("scale mode: divisor must be positive");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw std::invalid_argument("scale mode: epsilon must be positive");
}

Vector scale_object_feature(const Vector& o, const Vector& v, const ScaleMode& mode) {
  mode.validate();
  switch (mode.kind) {
    case ScaleKind::none:
      return o;
    case ScaleKind::scalar_divide:
      if (mode.divisor == 1.0) return o;
      return scaled(o, 1.0 / mode.divisor);
    case ScaleKind::norm_to_amplitude:
      return amplitude_scale(o, v, mode.epsilon);
    case ScaleKind::norm_then_divide:
      return scaled(amplitude_scale(o, v, mode.epsilon), 1.0 / mode.divisor);
  }
  throw std::invalid_argument("scale mode: unknown kind");
}

std::pair<Vector, Vector> scale_object_feature_vjp(const Vector& o, const Vector& v,
                                                   const ScaleMode& mode, const Vector& upstream) {
  mode.validate();
  if (upstream.dim() != o.dim()) throw_shape_error("scale vjp: upstream", o.dim(), upstream.dim());
  switch (mode.kind) {
    case ScaleKind::none:
      return {upstream, Vector(v.dim())};
    case ScaleKind::scalar_divide:
      return {scaled(upstream, 1.0 / mode.divisor), Vector(v.dim())};
    case ScaleKind::norm_to_amplitude:
      return amplitude_scale_vjp(o, v, mode.epsilon, upstream);
    case ScaleKind::norm_then_divide:
      return amplitude_scale_vjp(o, v, mode.epsilon, scaled(upstream, 1.0 / mode.divisor));
  }
  throw std::invalid_argument("scale mode: unknown kind");
}

double estimate_scalar_divisor(std::span<const Vector> clip_features,
                               std::span<const Vector> object_features) {
  if (clip_features.empty() || object_features.empty())
    throw std::invalid_argument("estimate_scalar_divisor: empty calibration batch");
  double sum_v = 0.0;
  for (const auto& v : clip_features) sum_v += l2_norm(v);
  double sum_o = 0.0;
  for (const auto& o : object_features) sum_o += l2_norm(o);
  const double mean_v = sum_v / static_cast<double>(clip_features.size());
  const double mean_o = sum_o / static_cast<double>(object_features.size());
  if (mean_v == 0.0 || mean_o == 0.0)
    throw std::invalid_argument("estimate_scalar_divisor: zero mean amplitude");
  return mean_o / mean_v;
}

void GfaParams::validate() const {
  scale.validate();
  if (dim_v == 0 || dim_o == 0) throw ShapeError("gfa params: dim_v and dim_o must be positive");
  if (w.rows() != output_dim()) throw_shape_error("gfa params: W rows", output_dim(), w.rows());
  if (w.cols() != input_dim()) throw_shape_error("gfa params: W cols", input_dim(), w.cols());
  if (b.dim() != output_dim()) throw_shape_error("gfa params: b", output_dim(), b.dim());
  if (variant == GfaVariant::B && scale.kind != ScaleKind::none)
    throw std::invalid_argument("gfa params: type B gates on the raw object feature; scale must be none");
}

GfaParams init_gfa_params(GfaVariant variant, std::size_t dim_v, std::size_t dim_o,
                          const ScaleMode& scale, std::mt19937_64& rng) {
  GfaParams p = zero_gfa_params(variant, dim_v, dim_o, scale);
  const double bound = 1.0 / std::sqrt(static_cast<double>(p.input_dim()));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& x : p.w.values()) x = dist(rng);
  return p;
}

GfaParams zero_gfa_params(GfaVariant variant, std::size_t dim_v, std::size_t dim_o,
                          const ScaleMode& scale) {
  GfaParams p;
  p.variant = variant;
  p.dim_v = dim_v;
  p.dim_o = dim_o;
  p.scale = scale;
  p.w = Matrix(p.output_dim(), p.input_dim());
  p.b = Vector(p.output_dim());
  p.validate();
  return p;
}

namespace {

void check_inputs(const Vector& v, const Vector& o, const GfaParams& p, GfaVariant expected) {
  if (p.variant != expected) throw std::invalid_argument("gfa forward: params are for the other variant");
  p.validate();
  if (v.dim() != p.dim_v) throw_shape_error("gfa forward: v", p.dim_v, v.dim());
  if (o.dim() != p.dim_o) throw_shape_error("gfa forward: o", p.dim_o, o.dim());
}

}  // namespace

GfaOutput gfa_a_forward(const Vector& v, const Vector& o, const GfaParams& p) {
  check_inputs(v, o, p, GfaVariant::A);
  GfaCache cache;
  cache.variant = GfaVariant::A;
  cache.v = v;
  cache.o = o;
  cache.scaled_o = scale_object_feature(o, v, p.scale);
  cache.gate_input = concat(v, cache.scaled_o);
  cache.pre_activation = affine(cache.gate_input, p.w, p.b);
  cache.gate = sigmoid(cache.pre_activation);
  Vector fused = hadamard(cache.gate, cache.gate_input);
  return {std::move(fused), std::move(cache)};
}

GfaOutput gfa_b_forward(const Vector& v, const Vector& o, const GfaParams& p) {
  check_inputs(v, o, p, GfaVariant::B);
  GfaCache cache;
  cache.variant = GfaVariant::B;
  cache.v = v;
  cache.o = o;
  cache.gate_input = o;
  cache.pre_activation = affine(o, p.w, p.b);
  cache.gate = sigmoid(cache.pre_activation);
  Vector fused = hadamard(cache.gate, v);
  return {std::move(fused), std::move(cache)};
}

GfaOutput gfa_forward(const Vector& v, const Vector& o, const GfaParams& p) {
  return p.variant == GfaVariant::A ? gfa_a_forward(v, o, p) : gfa_b_forward(v, o, p);
}

GfaGrads gfa_backward(const GfaCache& cache, const GfaParams& p, const Vector& d_fused) {
  if (cache.variant != p.variant) throw std::invalid_argument("gfa backward: cache/params variant mismatch");
  if (cache.v.dim() != p.dim_v || cache.o.dim() != p.dim_o ||
      cache.gate_input.dim() != p.input_dim() || cache.gate.dim() != p.output_dim())
    throw std::invalid_argument("gfa backward: cache shapes do not match params");
  if (d_fused.dim() != p.output_dim())
    throw_shape_error("gfa backward: dF", p.output_dim(), d_fused.dim());

  // F = gate * x, x = c (type A) or v (type B)
  const Vector& gated = p.variant == GfaVariant::A ? cache.gate_input : cache.v;
  auto [d_gate, d_gated] = hadamard_vjp(cache.gate, gated, d_fused);
  Vector d_pre = sigmoid_vjp(cache.pre_activation, d_gate);
  AffineGrads aff = affine_vjp(cache.gate_input, p.w, d_pre);

  GfaGrads out;
  out.dw = std::move(aff.dw);
  out.db = std::move(aff.db);
  if (p.variant == GfaVariant::B) {
    out.dv = std::move(d_gated);
    out.d_o = std::move(aff.dx);
    return out;
  }

  // c feeds both the gate and the product.
  Vector d_c = add(d_gated, aff.dx);
  auto [dv_direct, d_scaled] = concat_vjp(p.dim_v, d_c);
  auto [d_o, dv_amplitude] = scale_object_feature_vjp(cache.o, cache.v, p.scale, d_scaled);
  out.dv = add(dv_direct, dv_amplitude);
  out.d_o = std::move(d_o);
  return out;
}

}  // namespace gatefuse
