// SPDX-License-Identifier: Apache-2.0
//
// Gated Feature Aggregator.
//
//   type A:  c = [v, scale(o)],  F = sigmoid(W c + b) * c      (dim_v + dim_o)
//   type B:                      F = sigmoid(W o + b) * v      (dim_v)
//
// scale() brings the object feature to the amplitude of the clip feature,
// either by a fixed divisor or by l2-normalising o and multiplying by |v|.

#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>

#include "gatefuse/tensor.hpp"

namespace gatefuse {

enum class GfaVariant { A, B };

enum class ScaleKind {
  none,
  scalar_divide,      // o / s
  norm_to_amplitude,  // o / max(|o|, eps) * |v|
  norm_then_divide,   // (o / max(|o|, eps) * |v|) / s
};

std::string to_string(ScaleKind kind);
/// Accepts "none", "scalar-divide", "norm-to-amplitude", "norm-then-divide".
ScaleKind parse_scale_kind(const std::string& name);

struct ScaleMode {
  ScaleKind kind = ScaleKind::none;
  double divisor = 1.0;
  double epsilon = 1e-8;

  static ScaleMode none() { return {}; }
  static ScaleMode divide(double s) { return {ScaleKind::scalar_divide, s, 1e-8}; }
  static ScaleMode norm() { return {ScaleKind::norm_to_amplitude, 1.0, 1e-8}; }
  static ScaleMode norm_divide(double s) { return {ScaleKind::norm_then_divide, s, 1e-8}; }

  /// Throws std::invalid_argument unless divisor > 0 and epsilon > 0.
  void validate() const;

  friend bool operator==(const ScaleMode&, const ScaleMode&) = default;
};

Vector scale_object_feature(const Vector& o, const Vector& v, const ScaleMode& mode);

/// Returns {do, dv}; dv is nonzero only for the norm-based modes.
std::pair<Vector, Vector> scale_object_feature_vjp(const Vector& o, const Vector& v,
                                                   const ScaleMode& mode, const Vector& upstream);

/// mean(|o|) / mean(|v|) over a calibration batch, for use as the scalar divisor.
double estimate_scalar_divisor(std::span<const Vector> clip_features,
                               std::span<const Vector> object_features);

struct GfaParams {
  GfaVariant variant = GfaVariant::A;
  std::size_t dim_v = 0;
  std::size_t dim_o = 0;
  Matrix w;
  Vector b;
  ScaleMode scale;

  std::size_t input_dim() const { return variant == GfaVariant::A ? dim_v + dim_o : dim_o; }
  std::size_t output_dim() const { return variant == GfaVariant::A ? dim_v + dim_o : dim_v; }

  /// Shape and scale-mode checks. Type B takes o unscaled, so its scale kind
  /// must be `none`.
  void validate() const;

  friend bool operator==(const GfaParams&, const GfaParams&) = default;
};

/// W uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], b = 0.
GfaParams init_gfa_params(GfaVariant variant, std::size_t dim_v, std::size_t dim_o,
                          const ScaleMode& scale, std::mt19937_64& rng);

/// W = 0, b = 0: every gate is exactly 1/2.
GfaParams zero_gfa_params(GfaVariant variant, std::size_t dim_v, std::size_t dim_o,
                          const ScaleMode& scale = {});

/// Intermediates saved by the forward pass.
struct GfaCache {
  GfaVariant variant = GfaVariant::A;
  Vector v;
  Vector o;
  Vector scaled_o;  // type A only
  Vector gate_input;  // c for type A, o for type B
  Vector pre_activation;
  Vector gate;
};

struct GfaOutput {
  Vector fused;
  GfaCache cache;
};

GfaOutput gfa_a_forward(const Vector& v, const Vector& o, const GfaParams& p);
GfaOutput gfa_b_forward(const Vector& v, const Vector& o, const GfaParams& p);
GfaOutput gfa_forward(const Vector& v, const Vector& o, const GfaParams& p);

struct GfaGrads {
  Vector dv;
  Vector d_o;
  Matrix dw;
  Vector db;
};

/// Exact gradients of <dF, F> with respect to v, o, W and b. Throws
/// std::invalid_argument when the cache was produced under different params.
GfaGrads gfa_backward(const GfaCache& cache, const GfaParams& p, const Vector& d_fused);

}  // namespace gatefuse
