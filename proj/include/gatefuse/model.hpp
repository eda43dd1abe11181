// SPDX-License-Identifier: Apache-2.0
//
// Classifier models over fused clip/object features: an optional gated
// aggregator followed by a single affine head.

#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gatefuse/gfa.hpp"
#include "gatefuse/tensor.hpp"

namespace gatefuse {

enum class FusionKind { clip_only, concat, gfa_a, gfa_b };

std::string to_string(FusionKind kind);
/// Accepts "clip-only", "concat", "gfa-a", "gfa-b". Throws std::invalid_argument.
FusionKind parse_fusion_kind(const std::string& name);

struct Head {
  Matrix w;  // classes x feature_dim
  Vector b;

  friend bool operator==(const Head&, const Head&) = default;
};

struct Model {
  FusionKind fusion = FusionKind::clip_only;
  std::size_t dim_v = 0;
  std::size_t dim_o = 0;
  std::optional<GfaParams> gfa;  // present iff fusion is gfa-a or gfa-b
  Head head;

  std::size_t feature_dim() const;
  std::size_t num_classes() const { return head.w.rows(); }

  /// Throws ShapeError / std::invalid_argument when fusion kind, gfa presence
  /// and shapes disagree.
  void validate() const;

  friend bool operator==(const Model&, const Model&) = default;
};

/// Fan-in uniform init for every weight matrix, zero biases. `scale` applies
/// to gfa-a only.
Model init_model(FusionKind fusion, std::size_t dim_v, std::size_t dim_o, std::size_t classes,
                 const ScaleMode& scale, std::mt19937_64& rng);

struct ModelCache {
  Vector v;
  Vector o;
  Vector features;  // input to the head
  std::optional<GfaCache> gfa;
};

struct ModelOutput {
  Vector scores;
  ModelCache cache;
};

/// clip-only: head(v); concat: head([v, o]); gfa-a / gfa-b: head(F).
ModelOutput forward_model(const Model& model, const Vector& v, const Vector& o);

/// Parameter-shaped container; used for gradients and momentum buffers.
struct ParamGrads {
  std::optional<Matrix> gfa_w;
  std::optional<Vector> gfa_b;
  Matrix head_w;
  Vector head_b;

  static ParamGrads zeros_like(const Model& model);

  void add(const ParamGrads& other);
  void scale(double alpha);
  double l2_norm() const;

  friend bool operator==(const ParamGrads&, const ParamGrads&) = default;
};

struct ModelGrads {
  ParamGrads params;
  Vector dv;
  Vector d_o;
};

ModelGrads backward_model(const Model& model, const ModelCache& cache, const Vector& d_scores);

/// Max-subtracted softmax.
Vector softmax(const Vector& scores);

inline constexpr double kProbabilityFloor = 1e-12;

/// -log(max(probs[label], 1e-12)). Throws std::out_of_range for a bad label.
double cross_entropy(const Vector& probs, int label);

/// probs - onehot(label): the gradient of -log softmax(s)[label]. The
/// probability floor guards the reported loss only.
Vector softmax_cross_entropy_grad(const Vector& probs, int label);

struct LossAndGrads {
  double loss = 0.0;
  ModelGrads grads;
};

LossAndGrads loss_and_grads(const Model& model, const Vector& v, const Vector& o, int label);

/// velocity <- momentum * velocity + grads;  params <- params - lr * velocity.
void sgd_momentum_step(std::span<double> params, std::span<const double> grads,
                       std::span<double> velocity, double lr, double momentum);

/// Model-level step. GFA parameters are left untouched when `update_gfa` is false.
void sgd_momentum_step(Model& model, const ParamGrads& grads, ParamGrads& velocity, double lr,
                       double momentum, bool update_gfa = true);

struct GradCheckGroup {
  std::string name;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  double max_rel_error = 0.0;
};

/// Central finite differences of the end-to-end loss against the analytic
/// gradient for every parameter and both inputs. Relative error uses the
/// denominator max(|analytic|, |numeric|, 1e-8).
GradCheckReport grad_check(const Model& model, const Vector& v, const Vector& o, int label,
                           double step = 1e-5);

}  // namespace gatefuse
