// SPDX-License-Identifier: Apache-2.0

#include "gatefuse/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>
#include <stdexcept>

namespace gatefuse {

std::string to_string(FusionKind kind) {
  switch (kind) {
    case FusionKind::clip_only: return "clip-only";
    case FusionKind::concat: return "concat";
    case FusionKind::gfa_a: return "gfa-a";
    case FusionKind::gfa_b: return "gfa-b";
  }
  return "unknown";
}

FusionKind parse_fusion_kind(const std::string& name) {
  if (name == "clip-only") return FusionKind::clip_only;
  if (name == "concat") return FusionKind::concat;
  if (name == "gfa-a") return FusionKind::gfa_a;
  if (name == "gfa-b") return FusionKind::gfa_b;
  throw std::invalid_argument("unknown fusion kind '" + name + "'");
}

std::size_t Model::feature_dim() const {
  switch (fusion) {
    case FusionKind::clip_only: return dim_v;
    case FusionKind::concat: return dim_v + dim_o;
    case FusionKind::gfa_a: return dim_v + dim_o;
    case FusionKind::gfa_b: return dim_v;
  }
  return 0;
}

void Model::validate() const {
  if (dim_v == 0 || dim_o == 0) throw ShapeError("model: dim_v and dim_o must be positive");
  const bool wants_gfa = fusion == FusionKind::gfa_a || fusion == FusionKind::gfa_b;
  if (wants_gfa != gfa.has_value())
    throw std::invalid_argument("model: gfa params must be present exactly for gfa fusion kinds");
  if (gfa) {
    const auto expected = fusion == FusionKind::gfa_a ? GfaVariant::A : GfaVariant::B;
    if (gfa->variant != expected) throw std::invalid_argument("model: gfa variant does not match fusion kind");
    if (gfa->dim_v != dim_v) throw_shape_error("model: gfa dim_v", dim_v, gfa->dim_v);
    if (gfa->dim_o != dim_o) throw_shape_error("model: gfa dim_o", dim_o, gfa->dim_o);
    gfa->validate();
  }
  if (head.w.rows() == 0) throw ShapeError("model: head must have at least one class");
  if (head.w.cols() != feature_dim()) throw_shape_error("model: head W cols", feature_dim(), head.w.cols());
  if (head.b.dim() != head.w.rows()) throw_shape_error("model: head b", head.w.rows(), head.b.dim());
}

Model init_model(FusionKind fusion, std::size_t dim_v, std::size_t dim_o, std::size_t classes,
                 const ScaleMode& scale, std::mt19937_64& rng) {
  Model m;
  m.fusion = fusion;
  m.dim_v = dim_v;
  m.dim_o = dim_o;
  if (fusion == FusionKind::gfa_a) m.gfa = init_gfa_params(GfaVariant::A, dim_v, dim_o, scale, rng);
  if (fusion == FusionKind::gfa_b) m.gfa = init_gfa_params(GfaVariant::B, dim_v, dim_o, {}, rng);

  const std::size_t fan_in = m.feature_dim();
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  m.head.w = Matrix(classes, fan_in);
  for (double& x : m.head.w.values()) x = dist(rng);
  m.head.b = Vector(classes);
  m.validate();
  return m;
}

ModelOutput forward_model(const Model& model, const Vector& v, const Vector& o) {
  if (v.dim() != model.dim_v) throw_shape_error("forward_model: v", model.dim_v, v.dim());
  ModelCache cache;
  cache.v = v;
  cache.o = o;
  switch (model.fusion) {
    case FusionKind::clip_only:
      cache.features = v;
      break;
    case FusionKind::concat:
      if (o.dim() != model.dim_o) throw_shape_error("forward_model: o", model.dim_o, o.dim());
      cache.features = concat(v, o);
      break;
    case FusionKind::gfa_a:
    case FusionKind::gfa_b: {
      if (!model.gfa) throw std::invalid_argument("forward_model: gfa params missing");
      auto out = gfa_forward(v, o, *model.gfa);
      cache.features = std::move(out.fused);
      cache.gfa = std::move(out.cache);
      break;
    }
  }
  Vector scores = affine(cache.features, model.head.w, model.head.b);
  return {std::move(scores), std::move(cache)};
}

ParamGrads ParamGrads::zeros_like(const Model& model) {
  ParamGrads g;
  if (model.gfa) {
    g.gfa_w = Matrix(model.gfa->w.rows(), model.gfa->w.cols());
    g.gfa_b = Vector(model.gfa->b.dim());
  }
  g.head_w = Matrix(model.head.w.rows(), model.head.w.cols());
  g.head_b = Vector(model.head.b.dim());
  return g;
}

namespace {

void axpy_into(std::span<double> dst, std::span<const double> src, double alpha) {
  if (dst.size() != src.size()) throw_shape_error("parameter buffer", dst.size(), src.size());
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += alpha * src[i];
}

double sum_squares(std::span<const double> xs) {
  double acc = 0.0;
  for (double x : xs) acc += x * x;
  return acc;
}

void require_finite(std::span<const double> xs, const char* what) {
  for (double x : xs)
    if (!std::isfinite(x)) throw NumericError(std::string(what) + ": parameter became non-finite");
}

}  // namespace

void ParamGrads::add(const ParamGrads& other) {
  if (gfa_w.has_value() != other.gfa_w.has_value())
    throw std::invalid_argument("ParamGrads::add: gfa presence mismatch");
  if (gfa_w) {
    axpy_into(gfa_w->values(), other.gfa_w->values(), 1.0);
    axpy_into(gfa_b->values(), other.gfa_b->values(), 1.0);
  }
  axpy_into(head_w.values(), other.head_w.values(), 1.0);
  axpy_into(head_b.values(), other.head_b.values(), 1.0);
}

void ParamGrads::scale(double alpha) {
  auto apply = [alpha](std::span<double> xs) {
    for (double& x : xs) x *= alpha;
  };
  if (gfa_w) {
    apply(gfa_w->values());
    apply(gfa_b->values());
  }
  apply(head_w.values());
  apply(head_b.values());
}

double ParamGrads::l2_norm() const {
  double acc = sum_squares(head_w.values()) + sum_squares(head_b.values());
  if (gfa_w) acc += sum_squares(gfa_w->values()) + sum_squares(gfa_b->values());
  return std::sqrt(acc);
}

ModelGrads backward_model(const Model& model, const ModelCache& cache, const Vector& d_scores) {
  if (d_scores.dim() != model.num_classes())
    throw_shape_error("backward_model: d_scores", model.num_classes(), d_scores.dim());
  ModelGrads out;
  AffineGrads head = affine_vjp(cache.features, model.head.w, d_scores);
  out.params.head_w = std::move(head.dw);
  out.params.head_b = std::move(head.db);
  switch (model.fusion) {
    case FusionKind::clip_only:
      out.dv = std::move(head.dx);
      out.d_o = Vector(cache.o.dim());
      break;
    case FusionKind::concat: {
      auto [dv, d_o] = concat_vjp(model.dim_v, head.dx);
      out.dv = std::move(dv);
      out.d_o = std::move(d_o);
      break;
    }
    case FusionKind::gfa_a:
    case FusionKind::gfa_b: {
      if (!model.gfa || !cache.gfa) throw std::invalid_argument("backward_model: gfa cache missing");
      GfaGrads g = gfa_backward(*cache.gfa, *model.gfa, head.dx);
      out.params.gfa_w = std::move(g.dw);
      out.params.gfa_b = std::move(g.db);
      out.dv = std::move(g.dv);
      out.d_o = std::move(g.d_o);
      break;
    }
  }
  return out;
}

Vector softmax(const Vector& scores) {
  if (scores.empty()) return scores;
  const double top = *std::max_element(scores.begin(), scores.end());
  std::vector<double> out(scores.dim());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.dim(); ++i) {
    out[i] = std::exp(scores[i] - top);
    total += out[i];
  }
  for (double& x : out) x /= total;
  return Vector(std::move(out));
}

double cross_entropy(const Vector& probs, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= probs.dim())
    throw std::out_of_range("cross_entropy: label " + std::to_string(label) + " out of range");
  return -std::log(std::max(probs[static_cast<std::size_t>(label)], kProbabilityFloor));
}

Vector softmax_cross_entropy_grad(const Vector& probs, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= probs.dim())
    throw std::out_of_range("softmax_cross_entropy_grad: label " + std::to_string(label) + " out of range");
  const auto y = static_cast<std::size_t>(label);
  Vector g = probs;
  g[y] -= 1.0;
  return g;
}

LossAndGrads loss_and_grads(const Model& model, const Vector& v, const Vector& o, int label) {
  auto out = forward_model(model, v, o);
  const Vector probs = softmax(out.scores);
  LossAndGrads r;
  r.loss = cross_entropy(probs, label);
  r.grads = backward_model(model, out.cache, softmax_cross_entropy_grad(probs, label));
  return r;
}

void sgd_momentum_step(std::span<double> params, std::span<const double> grads,
                       std::span<double> velocity, double lr, double momentum) {
  if (grads.size() != params.size()) throw_shape_error("sgd step: grads", params.size(), grads.size());
  if (velocity.size() != params.size())
    throw_shape_error("sgd step: velocity", params.size(), velocity.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = momentum * velocity[i] + grads[i];
    params[i] -= lr * velocity[i];
  }
  require_finite(params, "sgd step");
}

void sgd_momentum_step(Model& model, const ParamGrads& grads, ParamGrads& velocity, double lr,
                       double momentum, bool update_gfa) {
  if (model.gfa.has_value() != grads.gfa_w.has_value() ||
      model.gfa.has_value() != velocity.gfa_w.has_value())
    throw std::invalid_argument("sgd step: gfa presence mismatch between model, grads and velocity");
  if (model.gfa && update_gfa) {
    sgd_momentum_step(model.gfa->w.values(), grads.gfa_w->values(), velocity.gfa_w->values(), lr,
                      momentum);
    sgd_momentum_step(model.gfa->b.values(), grads.gfa_b->values(), velocity.gfa_b->values(), lr,
                      momentum);
  }
  sgd_momentum_step(model.head.w.values(), grads.head_w.values(), velocity.head_w.values(), lr,
                    momentum);
  sgd_momentum_step(model.head.b.values(), grads.head_b.values(), velocity.head_b.values(), lr,
                    momentum);
}

// ---------------------------------------------------------------------------
// Gradient check
//
// The reference loss is a separate extended-precision forward pass over a flat
// parameter vector. Evaluating it in long double keeps the cancellation error
// of the central difference far below the entries being checked, so small
// gradient entries are compared against a trustworthy numeric value.

namespace {

using Real = long double;

double rel_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

struct Segment {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

// Flat layout: gfa.W, gfa.b (when present), head.W, head.b, v, o.
struct FlatLayout {
  std::vector<Segment> segments;
  std::vector<Real> theta;

  void append(std::string name, std::span<const double> values) {
    segments.push_back({std::move(name), theta.size(), values.size()});
    theta.insert(theta.end(), values.begin(), values.end());
  }
  const Segment& at(const std::string& name) const {
    for (const auto& s : segments)
      if (s.name == name) return s;
    throw std::logic_error("grad_check: no segment " + name);
  }
};

std::vector<Real> ref_affine(const Real* w, const Real* b, const std::vector<Real>& x, std::size_t rows) {
  std::vector<Real> y(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    Real acc = b[r];
    for (std::size_t c = 0; c < x.size(); ++c) acc += w[r * x.size() + c] * x[c];
    y[r] = acc;
  }
  return y;
}

Real ref_norm(const std::vector<Real>& x) {
  Real sq = 0;
  for (Real e : x) sq += e * e;
  return std::sqrt(sq);
}

Real ref_sigmoid(Real x) { return x >= 0 ? 1 / (1 + std::exp(-x)) : std::exp(x) / (1 + std::exp(x)); }

std::vector<Real> ref_scale(const std::vector<Real>& o, const std::vector<Real>& v, const ScaleMode& mode) {
  std::vector<Real> out = o;
  Real factor = 1;
  if (mode.kind == ScaleKind::norm_to_amplitude || mode.kind == ScaleKind::norm_then_divide)
    factor = ref_norm(v) / std::max(ref_norm(o), static_cast<Real>(mode.epsilon));
  if (mode.kind == ScaleKind::scalar_divide || mode.kind == ScaleKind::norm_then_divide)
    factor /= static_cast<Real>(mode.divisor);
  if (mode.kind != ScaleKind::none)
    for (Real& e : out) e *= factor;
  return out;
}

Real reference_loss(const Model& model, const FlatLayout& layout, const std::vector<Real>& theta, int label) {
  auto slice = [&](const std::string& name) {
    const Segment& s = layout.at(name);
    return std::vector<Real>(theta.begin() + static_cast<std::ptrdiff_t>(s.offset),
                             theta.begin() + static_cast<std::ptrdiff_t>(s.offset + s.size));
  };
  const std::vector<Real> v = slice("input.v");
  const std::vector<Real> o = slice("input.o");

  std::vector<Real> features;
  switch (model.fusion) {
    case FusionKind::clip_only:
      features = v;
      break;
    case FusionKind::concat:
      features = v;
      features.insert(features.end(), o.begin(), o.end());
      break;
    case FusionKind::gfa_a:
    case FusionKind::gfa_b: {
      const std::vector<Real> w = slice("gfa.W");
      const std::vector<Real> b = slice("gfa.b");
      std::vector<Real> gate_input;
      if (model.fusion == FusionKind::gfa_a) {
        gate_input = v;
        const std::vector<Real> so = ref_scale(o, v, model.gfa->scale);
        gate_input.insert(gate_input.end(), so.begin(), so.end());
      } else {
        gate_input = o;
      }
      const std::vector<Real> z = ref_affine(w.data(), b.data(), gate_input, b.size());
      const std::vector<Real>& gated = model.fusion == FusionKind::gfa_a ? gate_input : v;
      features.resize(gated.size());
      for (std::size_t i = 0; i < gated.size(); ++i) features[i] = ref_sigmoid(z[i]) * gated[i];
      break;
    }
  }
  const std::vector<Real> hw = slice("head.W");
  const std::vector<Real> hb = slice("head.b");
  const std::vector<Real> scores = ref_affine(hw.data(), hb.data(), features, hb.size());
  const Real top = *std::max_element(scores.begin(), scores.end());
  Real sum = 0;
  for (Real s : scores) sum += std::exp(s - top);
  const Real p = std::exp(scores[static_cast<std::size_t>(label)] - top) / sum;
  return -std::log(std::max(p, static_cast<Real>(kProbabilityFloor)));
}

}  // namespace

GradCheckReport grad_check(const Model& model, const Vector& v, const Vector& o, int label,
                           double step) {
  if (!(step > 0.0)) throw std::invalid_argument("grad_check: step must be positive");
  const LossAndGrads analytic = loss_and_grads(model, v, o, label);
  const auto& g = analytic.grads;

  FlatLayout layout;
  std::vector<std::span<const double>> grads;
  if (model.gfa) {
    layout.append("gfa.W", model.gfa->w.values());
    layout.append("gfa.b", model.gfa->b.values());
    grads.push_back(g.params.gfa_w->values());
    grads.push_back(g.params.gfa_b->values());
  }
  layout.append("head.W", model.head.w.values());
  layout.append("head.b", model.head.b.values());
  layout.append("input.v", v.values());
  layout.append("input.o", o.values());
  grads.push_back(g.params.head_w.values());
  grads.push_back(g.params.head_b.values());
  grads.push_back(g.dv.values());
  grads.push_back(g.d_o.values());

  GradCheckReport report;
  std::vector<Real> theta = layout.theta;
  for (std::size_t s = 0; s < layout.segments.size(); ++s) {
    const Segment& seg = layout.segments[s];
    double worst = 0.0;
    for (std::size_t i = 0; i < seg.size; ++i) {
      Real& x = theta[seg.offset + i];
      const Real saved = x;
      x = saved + static_cast<Real>(step);
      const Real plus = reference_loss(model, layout, theta, label);
      x = saved - static_cast<Real>(step);
      const Real minus = reference_loss(model, layout, theta, label);
      x = saved;
      const auto numeric = static_cast<double>((plus - minus) / (2 * static_cast<Real>(step)));
      worst = std::max(worst, rel_error(grads[s][i], numeric));
    }
    report.groups.push_back({seg.name, worst});
    report.max_rel_error = std::max(report.max_rel_error, worst);
  }
  return report;
}

}  // namespace gatefuse
