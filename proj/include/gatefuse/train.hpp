// SPDX-License-Identifier: Apache-2.0
//
// Mini-batch SGD with momentum over a feature bank, one target (verb or
// noun) per model.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gatefuse/feature_bank.hpp"
#include "gatefuse/model.hpp"

namespace gatefuse {

enum class Target { verb, noun };

std::string to_string(Target target);
Target parse_target(const std::string& name);

struct ModelSpec {
  FusionKind fusion = FusionKind::gfa_a;
  ScaleMode scale = ScaleMode::norm();  // gfa-a only
  AggregationConfig aggregation;
};

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  int epochs = 100;
  int batch_size = 32;
  std::uint64_t seed = 0;
  bool train_gfa = true;  // false keeps the aggregator at its initialisation

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double mean_grad_norm = 0.0;  // l2 norm of each mini-batch gradient, averaged
  std::optional<double> val_top1;
};

struct TrainResult {
  Model model;
  std::vector<EpochStats> history;
};

/// Aggregated object feature for every record, in bank order.
std::vector<Vector> aggregate_bank(const FeatureBank& bank, const AggregationConfig& cfg);

/// Class labels for `target`; throws ValidationError if any record lacks one.
std::vector<int> target_labels(const FeatureBank& bank, Target target);

/// Model initialisation and batch order both come from cfg.seed, so equal
/// inputs give bitwise-equal results.
TrainResult train(const FeatureBank& bank, Target target, const ModelSpec& spec, const TrainConfig& cfg,
                  const FeatureBank* validation = nullptr);

/// Softmax class probabilities for every record.
std::vector<Vector> predict_probabilities(const Model& model, const FeatureBank& bank,
                                          const AggregationConfig& cfg);

/// Fraction of records whose argmax (lowest index on ties) equals the label.
double top1_accuracy(const Model& model, const FeatureBank& bank, Target target,
                     const AggregationConfig& cfg);

}  // namespace gatefuse
