// SPDX-License-Identifier: Apache-2.0

#include "gatefuse/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace gatefuse {

std::string to_string(Target target) { return target == Target::verb ? "verb" : "noun"; }

Target parse_target(const std::string& name) {
  if (name == "verb") return Target::verb;
  if (name == "noun") return Target::noun;
  throw std::invalid_argument("unknown target '" + name + "' (expected verb or noun)");
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw std::invalid_argument("train: learning rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("train: momentum must be in [0,1)");
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
}

std::vector<Vector> aggregate_bank(const FeatureBank& bank, const AggregationConfig& cfg) {
  std::vector<Vector> out;
  out.reserve(bank.records.size());
  for (const auto& r : bank.records) out.push_back(aggregate_object_feature(r, cfg, bank.dim_o));
  return out;
}

std::vector<int> target_labels(const FeatureBank& bank, Target target) {
  std::vector<int> out;
  out.reserve(bank.records.size());
  for (const auto& r : bank.records) {
    const auto& label = target == Target::verb ? r.verb_label : r.noun_label;
    if (!label) throw ValidationError("segment '" + r.segment_id + "' has no " + to_string(target) + " label");
    out.push_back(*label);
  }
  return out;
}

namespace {

int vocab_for(const FeatureBank& bank, Target target) {
  return target == Target::verb ? bank.verb_vocab_size : bank.noun_vocab_size;
}

void check_compatible(const Model& model, const FeatureBank& bank) {
  if (model.dim_v != bank.dim_v) throw ValidationError("model dim_v " + std::to_string(model.dim_v) +
                                                       " does not match bank dim_v " + std::to_string(bank.dim_v));
  if (model.dim_o != bank.dim_o) throw ValidationError("model dim_o " + std::to_string(model.dim_o) +
                                                       " does not match bank dim_o " + std::to_string(bank.dim_o));
}

std::size_t argmax(const Vector& x) {
  return static_cast<std::size_t>(std::distance(x.begin(), std::max_element(x.begin(), x.end())));
}

}  // namespace

TrainResult train(const FeatureBank& bank, Target target, const ModelSpec& spec, const TrainConfig& cfg,
                  const FeatureBank* validation) {
  cfg.validate();
  spec.aggregation.validate();
  bank.validate();
  if (bank.records.empty()) throw ValidationError("train: empty feature bank");
  const std::vector<int> labels = target_labels(bank, target);
  const std::vector<Vector> objects = aggregate_bank(bank, spec.aggregation);
  const int classes = vocab_for(bank, target);

  std::mt19937_64 rng(cfg.seed);
  TrainResult result;
  result.model = init_model(spec.fusion, bank.dim_v, bank.dim_o, static_cast<std::size_t>(classes), spec.scale, rng);
  Model& model = result.model;
  if (validation) check_compatible(model, *validation);

  ParamGrads velocity = ParamGrads::zeros_like(model);
  std::vector<std::size_t> order(bank.records.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    double grad_norm_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(start + batch, order.size());
      ParamGrads grads = ParamGrads::zeros_like(model);
      for (std::size_t i = start; i < stop; ++i) {
        const std::size_t idx = order[i];
        auto lg = loss_and_grads(model, bank.records[idx].clip_feature, objects[idx], labels[idx]);
        loss_sum += lg.loss;
        grads.add(lg.grads.params);
      }
      grads.scale(1.0 / static_cast<double>(stop - start));
      if (!cfg.train_gfa && grads.gfa_w) {
        grads.gfa_w = Matrix(grads.gfa_w->rows(), grads.gfa_w->cols());
        grads.gfa_b = Vector(grads.gfa_b->dim());
      }
      grad_norm_sum += grads.l2_norm();
      ++batches;
      sgd_momentum_step(model, grads, velocity, cfg.learning_rate, cfg.momentum, cfg.train_gfa);
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = loss_sum / static_cast<double>(order.size());
    stats.mean_grad_norm = grad_norm_sum / static_cast<double>(batches);
    if (validation) stats.val_top1 = top1_accuracy(model, *validation, target, spec.aggregation);
    result.history.push_back(stats);
  }
  return result;
}

std::vector<Vector> predict_probabilities(const Model& model, const FeatureBank& bank,
                                          const AggregationConfig& cfg) {
  check_compatible(model, bank);
  const std::vector<Vector> objects = aggregate_bank(bank, cfg);
  std::vector<Vector> out;
  out.reserve(objects.size());
  for (std::size_t i = 0; i < objects.size(); ++i)
    out.push_back(softmax(forward_model(model, bank.records[i].clip_feature, objects[i]).scores));
  return out;
}

double top1_accuracy(const Model& model, const FeatureBank& bank, Target target, const AggregationConfig& cfg) {
  const std::vector<int> labels = target_labels(bank, target);
  if (labels.empty()) throw ValidationError("top1_accuracy: empty bank");
  const auto probs = predict_probabilities(model, bank, cfg);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (argmax(probs[i]) == static_cast<std::size_t>(labels[i])) ++hits;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace gatefuse
