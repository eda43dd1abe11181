// SPDX-License-Identifier: Apache-2.0
//
// Synthetic feature banks for desk-scale experiments.
//
// Each verb owns a clip-space prototype and each noun an object-space
// prototype. Prototypes are nonnegative (post-ReLU-like) with per-coordinate
// RMS 1 for clips and `mismatch` for objects. With `object_prototypes` below
// the noun count, nouns share object prototypes and only the clip feature
// (via `clip_noun_weight`) tells them apart. Every frame around the clip
// center carries `objects_per_frame` high-score detections of the segment's
// noun plus `distractors_per_frame` low-score background detections.

#pragma once

#include <cstdint>
#include <string>

#include "gatefuse/feature_bank.hpp"

namespace gatefuse {

struct SynthSpec {
  int verbs = 10;
  int nouns = 20;
  std::size_t dim_v = 32;
  std::size_t dim_o = 32;
  int train_size = 500;
  int val_size = 200;
  double noise = 0.1;            // per-coordinate std, relative to prototype RMS
  double mismatch = 1.0;         // object/clip amplitude ratio
  double clip_noun_weight = 0.0; // share of the clip feature carrying noun identity
  int pairs_per_verb = 0;        // nouns each verb co-occurs with; 0 = all
  int object_prototypes = 0;     // distinct object prototypes; noun n uses n % count; 0 = one per noun
  int frame_span = 4;            // detections on frames center +- span
  int objects_per_frame = 2;
  int distractors_per_frame = 2;

  /// Throws std::invalid_argument on out-of-range parameters.
  void validate() const;
};

struct SynthSplit {
  FeatureBank train;
  FeatureBank val;
};

/// Deterministic in (spec, seed). Train and val share prototypes and the
/// verb-noun co-occurrence structure.
SynthSplit synth_generate_split(const SynthSpec& spec, std::uint64_t seed);

/// Training split only.
FeatureBank synth_generate(const SynthSpec& spec, std::uint64_t seed);

}  // namespace gatefuse
