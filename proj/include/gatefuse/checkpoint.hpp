// SPDX-License-Identifier: Apache-2.0
//
// Model checkpoints: JSON with declared shapes, round-trip-precision numbers,
// and the configuration that produced the model.

#pragma once

#include <filesystem>
#include <iosfwd>

#include "gatefuse/model.hpp"
#include "gatefuse/train.hpp"

namespace gatefuse {

struct Checkpoint {
  Target target = Target::noun;
  ModelSpec spec;
  TrainConfig train;
  Model model;

  friend bool operator==(const Checkpoint& a, const Checkpoint& b) {
    return a.target == b.target && a.model == b.model;
  }
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
/// Throws ValidationError on malformed or shape-inconsistent content.
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gatefuse
