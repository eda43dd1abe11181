// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "gatefuse/synth.hpp"
#include "gatefuse/train.hpp"

using namespace gatefuse;

namespace {

FeatureBank noun_bank(int size, std::uint64_t seed) {
  SynthSpec spec;
  spec.verbs = 4;
  spec.nouns = 6;
  spec.dim_v = 8;
  spec.dim_o = 8;
  spec.train_size = size;
  spec.val_size = 0;
  spec.frame_span = 2;
  return synth_generate(spec, seed);
}

}  // namespace

TEST_CASE("zero learning rate leaves the initialisation untouched") {
  const FeatureBank bank = noun_bank(40, 1);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 3;
  cfg.seed = 9;
  const ModelSpec spec{FusionKind::gfa_a, ScaleMode::norm(), {}};
  const TrainResult r = train(bank, Target::noun, spec, cfg);
  std::mt19937_64 rng(cfg.seed);
  const Model init = init_model(FusionKind::gfa_a, 8, 8, 6, ScaleMode::norm(), rng);
  CHECK(r.model == init);
  REQUIRE(r.history.size() == 3);
  CHECK(r.history[0].mean_loss == r.history[2].mean_loss);
}

TEST_CASE("training is bitwise deterministic in the seed") {
  const FeatureBank bank = noun_bank(60, 2);
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 7;
  cfg.seed = 3;
  const ModelSpec spec{FusionKind::gfa_b, ScaleMode::none(), {}};
  const TrainResult a = train(bank, Target::noun, spec, cfg, &bank);
  const TrainResult b = train(bank, Target::noun, spec, cfg, &bank);
  CHECK(a.model == b.model);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].mean_loss == b.history[i].mean_loss);
    CHECK(a.history[i].mean_grad_norm == b.history[i].mean_grad_norm);
    CHECK(a.history[i].val_top1 == b.history[i].val_top1);
  }
  cfg.seed = 4;
  CHECK_FALSE(train(bank, Target::noun, spec, cfg).model == a.model);
}

TEST_CASE("gfa-b learns nouns carried only by object features") {
  const FeatureBank bank = noun_bank(120, 5);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.learning_rate = 0.05;
  const ModelSpec spec{FusionKind::gfa_b, ScaleMode::none(), {}};
  const TrainResult r = train(bank, Target::noun, spec, cfg);
  CHECK(top1_accuracy(r.model, bank, Target::noun, spec.aggregation) == 1.0);
  CHECK(r.history.back().mean_loss < r.history.front().mean_loss);
}

TEST_CASE("training input errors") {
  FeatureBank bank = noun_bank(10, 1);
  bank.records[3].noun_label.reset();
  CHECK_THROWS_AS(train(bank, Target::noun, {}, {}), ValidationError);
  TrainConfig cfg;
  cfg.batch_size = 0;
  CHECK_THROWS_AS(train(noun_bank(10, 1), Target::noun, {}, cfg), std::invalid_argument);
  CHECK_THROWS_AS(parse_target("object"), std::invalid_argument);
}
