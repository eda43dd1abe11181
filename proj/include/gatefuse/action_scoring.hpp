// SPDX-License-Identifier: Apache-2.0
//
// Verb/noun/action score tables, top-k accuracy, late fusion, and action
// scoring re-weighted by the training-set verb-noun co-occurrence prior:
//
//   score(v, n) = mu(v, n) * P(verb = v) * P(noun = n)

#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gatefuse/feature_bank.hpp"
#include "gatefuse/tensor.hpp"

namespace gatefuse {

enum class ScoreSpace { verb, noun, action };

std::string to_string(ScoreSpace space);
ScoreSpace parse_score_space(const std::string& name);

/// One row of class scores per segment. Action rows are flattened
/// verb-major: index = verb * noun_vocab + noun.
struct ScoreTable {
  ScoreSpace space = ScoreSpace::verb;
  int vocab_size = 0;
  int verb_vocab = 0;  // action space only
  int noun_vocab = 0;  // action space only
  std::vector<std::string> segment_ids;
  std::vector<Vector> rows;

  void validate() const;

  friend bool operator==(const ScoreTable&, const ScoreTable&) = default;
};

/// True when `label` ranks within the k largest entries of `row`. Among
/// equal scores the lower class index ranks first.
bool in_top_k(std::span<const double> row, int label, int k);

/// Fraction of rows whose label is in the top k.
double topk_accuracy(const ScoreTable& table, std::span<const int> labels, int k);

class ActionPrior {
 public:
  ActionPrior() = default;
  ActionPrior(int verb_vocab, int noun_vocab);

  /// mu = 1 for every pair.
  static ActionPrior all_ones(int verb_vocab, int noun_vocab);

  int verb_vocab() const { return verb_vocab_; }
  int noun_vocab() const { return noun_vocab_; }

  /// Absent pairs are 0.
  double operator()(int verb, int noun) const;

  /// Stores a strictly positive frequency; zero erases the pair.
  void set(int verb, int noun, double frequency);

  const std::map<std::pair<int, int>, double>& entries() const { return mu_; }

  friend bool operator==(const ActionPrior&, const ActionPrior&) = default;

 private:
  void check_bounds(int verb, int noun) const;

  int verb_vocab_ = 0;
  int noun_vocab_ = 0;
  std::map<std::pair<int, int>, double> mu_;
};

/// Relative frequency of each (verb, noun) pair among labelled segments.
/// Throws ValidationError when a record lacks either label.
ActionPrior compute_prior(const FeatureBank& bank);

/// Number of distinct (verb, noun) pairs occurring more than `threshold` times.
std::size_t pairs_above_count(const FeatureBank& bank, int threshold);

/// Flattened verb-major action scores. Pairs with mu = 0 score exactly 0.
Vector reweight_actions(const Vector& verb_probs, const Vector& noun_probs, const ActionPrior& prior);

/// x / sum(x); returned unchanged when the sum is zero.
Vector renormalize(const Vector& scores);

/// Per-segment weighted mean of the tables' L1-normalised rows.
ScoreTable late_fuse(std::span<const ScoreTable> tables, std::span<const double> weights);

struct ActionLabel {
  int verb = 0;
  int noun = 0;
};

/// Labels of the given segments, looked up by id.
std::vector<ActionLabel> labels_for(const FeatureBank& bank, std::span<const std::string> segment_ids);

struct TopK {
  double top1 = 0.0;
  double top5 = 0.0;
};

struct ActionEvaluation {
  ScoreTable reweighted;
  ScoreTable plain;  // mu replaced by all-ones
  TopK reweighted_accuracy;
  TopK plain_accuracy;
};

/// Throws ValidationError when the two tables do not list the same segments
/// in the same order; the message names the first mismatch.
ActionEvaluation score_actions_for_bank(const ScoreTable& verb_table, const ScoreTable& noun_table,
                                        const ActionPrior& prior, std::span<const ActionLabel> labels);

// File formats ---------------------------------------------------------------

/// Header "<space> <vocab>" (action: "action <vocab> <verbs> <nouns>"), then
/// "<segment_id> <score>..." per line with round-trip precision.
void write_score_table(std::ostream& out, const ScoreTable& table);
ScoreTable read_score_table(std::istream& in);
void save_score_table(const std::filesystem::path& path, const ScoreTable& table);
ScoreTable load_score_table(const std::filesystem::path& path);

/// "# verbs <V> nouns <N>" then "verb_id noun_id frequency" lines.
void write_prior(std::ostream& out, const ActionPrior& prior);
ActionPrior read_prior(std::istream& in);
void save_prior(const std::filesystem::path& path, const ActionPrior& prior);
ActionPrior load_prior(const std::filesystem::path& path);

}  // namespace gatefuse
