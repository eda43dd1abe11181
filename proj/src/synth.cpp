// SPDX-License-Identifier: Apache-2.0

#include "gatefuse/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <stdexcept>

namespace gatefuse {

void SynthSpec::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("synth: " + what); };
  if (verbs < 1 || nouns < 1) fail("verbs and nouns must be >= 1");
  if (dim_v == 0 || dim_o == 0) fail("dims must be positive");
  if (train_size < 1 || val_size < 0) fail("train_size must be >= 1 and val_size >= 0");
  if (!(noise >= 0.0) || !std::isfinite(noise)) fail("noise must be >= 0");
  if (!(mismatch > 0.0) || !std::isfinite(mismatch)) fail("mismatch must be > 0");
  if (!(clip_noun_weight >= 0.0 && clip_noun_weight <= 1.0)) fail("clip_noun_weight must be in [0,1]");
  if (pairs_per_verb < 0) fail("pairs_per_verb must be >= 0");
  if (object_prototypes < 0) fail("object_prototypes must be >= 0");
  if (frame_span < 0) fail("frame_span must be >= 0");
  if (objects_per_frame < 0 || distractors_per_frame < 0) fail("per-frame counts must be >= 0");
}

namespace {

using Rng = std::mt19937_64;

// Nonnegative random direction with per-coordinate RMS `rms`.
std::vector<double> prototype(std::size_t dim, double rms, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> p(dim);
  double sq = 0.0;
  for (double& x : p) {
    x = std::abs(normal(rng));
    sq += x * x;
  }
  const double target = rms * std::sqrt(static_cast<double>(dim));
  const double norm = std::sqrt(sq);
  for (double& x : p) x *= norm > 0.0 ? target / norm : 0.0;
  return p;
}

struct World {
  std::vector<std::vector<double>> verb_clip;
  std::vector<std::vector<double>> noun_clip;
  std::vector<std::vector<double>> noun_object;
  std::vector<std::vector<int>> nouns_for_verb;
};

World make_world(const SynthSpec& spec, Rng& rng) {
  World w;
  for (int v = 0; v < spec.verbs; ++v) w.verb_clip.push_back(prototype(spec.dim_v, 1.0, rng));
  for (int n = 0; n < spec.nouns; ++n) w.noun_clip.push_back(prototype(spec.dim_v, 1.0, rng));
  const int object_count =
      spec.object_prototypes == 0 ? spec.nouns : std::min(spec.object_prototypes, spec.nouns);
  for (int n = 0; n < object_count; ++n) w.noun_object.push_back(prototype(spec.dim_o, spec.mismatch, rng));

  std::vector<int> all(static_cast<std::size_t>(spec.nouns));
  std::iota(all.begin(), all.end(), 0);
  for (int v = 0; v < spec.verbs; ++v) {
    if (spec.pairs_per_verb == 0 || spec.pairs_per_verb >= spec.nouns) {
      w.nouns_for_verb.push_back(all);
    } else {
      std::vector<int> shuffled = all;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      shuffled.resize(static_cast<std::size_t>(spec.pairs_per_verb));
      std::sort(shuffled.begin(), shuffled.end());
      w.nouns_for_verb.push_back(std::move(shuffled));
    }
  }
  return w;
}

SegmentRecord make_record(const SynthSpec& spec, const World& w, const std::string& id, Rng& rng) {
  std::uniform_int_distribution<int> pick_verb(0, spec.verbs - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> object_score(0.6, 1.0);
  std::uniform_real_distribution<double> distractor_score(0.0, 0.55);

  SegmentRecord r;
  r.segment_id = id;
  const int verb = pick_verb(rng);
  const auto& candidates = w.nouns_for_verb[static_cast<std::size_t>(verb)];
  std::uniform_int_distribution<std::size_t> pick_noun(0, candidates.size() - 1);
  const int noun = candidates[pick_noun(rng)];
  r.verb_label = verb;
  r.noun_label = noun;

  std::vector<double> clip(spec.dim_v);
  const auto& vp = w.verb_clip[static_cast<std::size_t>(verb)];
  const auto& np = w.noun_clip[static_cast<std::size_t>(noun)];
  for (std::size_t i = 0; i < spec.dim_v; ++i)
    clip[i] = (1.0 - spec.clip_noun_weight) * vp[i] + spec.clip_noun_weight * np[i] +
              spec.noise * normal(rng);
  r.clip_feature = Vector(std::move(clip));

  std::uniform_int_distribution<long> pick_center(1000, 100000);
  r.clip_center_frame = pick_center(rng);

  const auto& op = w.noun_object[static_cast<std::size_t>(noun) % w.noun_object.size()];
  for (long f = r.clip_center_frame - spec.frame_span; f <= r.clip_center_frame + spec.frame_span;
       ++f) {
    for (int b = 0; b < spec.objects_per_frame; ++b) {
      std::vector<double> feat(spec.dim_o);
      for (std::size_t i = 0; i < spec.dim_o; ++i)
        feat[i] = op[i] + spec.noise * spec.mismatch * normal(rng);
      r.detections.push_back({f, object_score(rng), Vector(std::move(feat))});
    }
    for (int b = 0; b < spec.distractors_per_frame; ++b) {
      std::vector<double> feat(spec.dim_o);
      for (double& x : feat) x = 0.5 * spec.mismatch * std::abs(normal(rng));
      r.detections.push_back({f, distractor_score(rng), Vector(std::move(feat))});
    }
  }
  return r;
}

FeatureBank empty_bank(const SynthSpec& spec) {
  FeatureBank bank;
  bank.dim_v = spec.dim_v;
  bank.dim_o = spec.dim_o;
  bank.verb_vocab_size = spec.verbs;
  bank.noun_vocab_size = spec.nouns;
  return bank;
}

std::string segment_name(const char* prefix, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%06d", prefix, index);
  return buf;
}

}  // namespace

SynthSplit synth_generate_split(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  const World world = make_world(spec, rng);
  SynthSplit out{empty_bank(spec), empty_bank(spec)};
  for (int i = 0; i < spec.train_size; ++i)
    out.train.records.push_back(make_record(spec, world, segment_name("train", i), rng));
  for (int i = 0; i < spec.val_size; ++i)
    out.val.records.push_back(make_record(spec, world, segment_name("val", i), rng));
  return out;
}

FeatureBank synth_generate(const SynthSpec& spec, std::uint64_t seed) {
  return synth_generate_split(spec, seed).train;
}

}  // namespace gatefuse
