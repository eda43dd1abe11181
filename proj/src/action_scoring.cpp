// SPDX-License-Identifier: Apache-2.0

#include "gatefuse/action_scoring.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <unordered_map>

#include "gatefuse/text_format.hpp"

namespace gatefuse {

std::string to_string(ScoreSpace space) {
  switch (space) {
    case ScoreSpace::verb: return "verb";
    case ScoreSpace::noun: return "noun";
    case ScoreSpace::action: return "action";
  }
  return "unknown";
}

ScoreSpace parse_score_space(const std::string& name) {
  if (name == "verb") return ScoreSpace::verb;
  if (name == "noun") return ScoreSpace::noun;
  if (name == "action") return ScoreSpace::action;
  throw std::invalid_argument("unknown score space '" + name + "'");
}

void ScoreTable::validate() const {
  if (vocab_size <= 0) throw ValidationError("score table: vocab size must be positive");
  if (space == ScoreSpace::action && (verb_vocab <= 0 || noun_vocab <= 0 || verb_vocab * noun_vocab != vocab_size))
    throw ValidationError("score table: action vocab must equal verbs x nouns");
  if (segment_ids.size() != rows.size())
    throw ValidationError("score table: " + std::to_string(segment_ids.size()) + " ids but " +
                          std::to_string(rows.size()) + " rows");
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].dim() != static_cast<std::size_t>(vocab_size))
      throw ValidationError("score table: row for '" + segment_ids[i] + "' has " +
                            std::to_string(rows[i].dim()) + " scores, expected " + std::to_string(vocab_size));
}

bool in_top_k(std::span<const double> row, int label, int k) {
  if (k < 1) throw std::invalid_argument("top-k: k must be >= 1");
  if (label < 0 || static_cast<std::size_t>(label) >= row.size())
    throw std::out_of_range("top-k: label " + std::to_string(label) + " out of range");
  const double target = row[static_cast<std::size_t>(label)];
  int rank = 0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (row[j] > target || (row[j] == target && j < static_cast<std::size_t>(label))) ++rank;
    if (rank >= k) return false;
  }
  return true;
}

double topk_accuracy(const ScoreTable& table, std::span<const int> labels, int k) {
  table.validate();
  if (labels.size() != table.rows.size())
    throw std::invalid_argument("top-k: " + std::to_string(labels.size()) + " labels for " +
                                std::to_string(table.rows.size()) + " rows");
  if (table.rows.empty()) throw std::invalid_argument("top-k: empty score table");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (in_top_k(table.rows[i].values(), labels[i], k)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

// ---------------------------------------------------------------------------
// Prior

ActionPrior::ActionPrior(int verb_vocab, int noun_vocab) : verb_vocab_(verb_vocab), noun_vocab_(noun_vocab) {
  if (verb_vocab <= 0 || noun_vocab <= 0) throw std::invalid_argument("prior: vocab sizes must be positive");
}

ActionPrior ActionPrior::all_ones(int verb_vocab, int noun_vocab) {
  ActionPrior p(verb_vocab, noun_vocab);
  for (int v = 0; v < verb_vocab; ++v)
    for (int n = 0; n < noun_vocab; ++n) p.mu_[{v, n}] = 1.0;
  return p;
}

void ActionPrior::check_bounds(int verb, int noun) const {
  if (verb < 0 || verb >= verb_vocab_ || noun < 0 || noun >= noun_vocab_)
    throw std::out_of_range("prior: pair (" + std::to_string(verb) + "," + std::to_string(noun) +
                            ") outside vocab " + std::to_string(verb_vocab_) + "x" + std::to_string(noun_vocab_));
}

double ActionPrior::operator()(int verb, int noun) const {
  check_bounds(verb, noun);
  const auto it = mu_.find({verb, noun});
  return it == mu_.end() ? 0.0 : it->second;
}

void ActionPrior::set(int verb, int noun, double frequency) {
  check_bounds(verb, noun);
  if (!(frequency >= 0.0) || !std::isfinite(frequency))
    throw std::invalid_argument("prior: frequency must be finite and >= 0");
  if (frequency == 0.0)
    mu_.erase({verb, noun});
  else
    mu_[{verb, noun}] = frequency;
}

namespace {

std::map<std::pair<int, int>, long> pair_counts(const FeatureBank& bank) {
  std::map<std::pair<int, int>, long> counts;
  for (const auto& r : bank.records) {
    if (!r.verb_label || !r.noun_label)
      throw ValidationError("segment '" + r.segment_id + "' lacks a verb or noun label");
    ++counts[{*r.verb_label, *r.noun_label}];
  }
  return counts;
}

}  // namespace

ActionPrior compute_prior(const FeatureBank& bank) {
  const auto counts = pair_counts(bank);
  if (bank.records.empty()) throw ValidationError("compute_prior: bank has no labelled segments");
  ActionPrior prior(bank.verb_vocab_size, bank.noun_vocab_size);
  const auto total = static_cast<double>(bank.records.size());
  for (const auto& [pair, count] : counts) prior.set(pair.first, pair.second, static_cast<double>(count) / total);
  return prior;
}

std::size_t pairs_above_count(const FeatureBank& bank, int threshold) {
  const auto counts = pair_counts(bank);
  return static_cast<std::size_t>(
      std::count_if(counts.begin(), counts.end(), [&](const auto& kv) { return kv.second > threshold; }));
}

Vector reweight_actions(const Vector& verb_probs, const Vector& noun_probs, const ActionPrior& prior) {
  if (verb_probs.dim() != static_cast<std::size_t>(prior.verb_vocab()))
    throw_shape_error("reweight_actions: verb probs vs prior", static_cast<std::size_t>(prior.verb_vocab()),
                      verb_probs.dim());
  if (noun_probs.dim() != static_cast<std::size_t>(prior.noun_vocab()))
    throw_shape_error("reweight_actions: noun probs vs prior", static_cast<std::size_t>(prior.noun_vocab()),
                      noun_probs.dim());
  const std::size_t nouns = noun_probs.dim();
  std::vector<double> out(verb_probs.dim() * nouns, 0.0);
  for (const auto& [pair, mu] : prior.entries()) {
    const auto v = static_cast<std::size_t>(pair.first);
    const auto n = static_cast<std::size_t>(pair.second);
    out[v * nouns + n] = mu * verb_probs[v] * noun_probs[n];
  }
  return Vector(std::move(out));
}

Vector renormalize(const Vector& scores) {
  double total = 0.0;
  for (double x : scores) total += x;
  if (total == 0.0) return scores;
  return scaled(scores, 1.0 / total);
}

namespace {

Vector l1_normalized(const Vector& row, const std::string& id) {
  double total = 0.0;
  for (double x : row) {
    if (x < 0.0) throw ValidationError("late_fuse: negative score in row '" + id + "'");
    total += x;
  }
  if (total == 0.0) throw ValidationError("late_fuse: all-zero row '" + id + "'");
  return scaled(row, 1.0 / total);
}

void require_aligned(const ScoreTable& a, const ScoreTable& b, const char* what) {
  const std::size_t n = std::min(a.segment_ids.size(), b.segment_ids.size());
  for (std::size_t i = 0; i < n; ++i)
    if (a.segment_ids[i] != b.segment_ids[i])
      throw ValidationError(std::string(what) + ": segment mismatch at row " + std::to_string(i) + ": '" +
                            a.segment_ids[i] + "' vs '" + b.segment_ids[i] + "'");
  if (a.segment_ids.size() != b.segment_ids.size())
    throw ValidationError(std::string(what) + ": tables have " + std::to_string(a.segment_ids.size()) + " and " +
                          std::to_string(b.segment_ids.size()) + " rows; first unmatched row " + std::to_string(n));
}

}  // namespace

ScoreTable late_fuse(std::span<const ScoreTable> tables, std::span<const double> weights) {
  if (tables.empty()) throw std::invalid_argument("late_fuse: no tables");
  if (weights.size() != tables.size())
    throw std::invalid_argument("late_fuse: " + std::to_string(weights.size()) + " weights for " +
                                std::to_string(tables.size()) + " tables");
  double weight_sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("late_fuse: weights must be >= 0");
    weight_sum += w;
  }
  if (weight_sum == 0.0) throw std::invalid_argument("late_fuse: weights are all zero");

  const ScoreTable& first = tables.front();
  first.validate();
  for (const auto& t : tables.subspan(1)) {
    t.validate();
    if (t.space != first.space || t.vocab_size != first.vocab_size)
      throw ValidationError("late_fuse: score space mismatch (" + to_string(first.space) + " " +
                            std::to_string(first.vocab_size) + " vs " + to_string(t.space) + " " +
                            std::to_string(t.vocab_size) + ")");
    require_aligned(first, t, "late_fuse");
  }

  ScoreTable out = first;
  for (std::size_t row = 0; row < first.rows.size(); ++row) {
    std::vector<double> acc(static_cast<std::size_t>(first.vocab_size), 0.0);
    for (std::size_t t = 0; t < tables.size(); ++t) {
      if (weights[t] == 0.0) continue;
      const Vector p = l1_normalized(tables[t].rows[row], tables[t].segment_ids[row]);
      const double w = weights[t] / weight_sum;
      for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += w * p[c];
    }
    out.rows[row] = Vector(std::move(acc));
  }
  return out;
}

std::vector<ActionLabel> labels_for(const FeatureBank& bank, std::span<const std::string> segment_ids) {
  std::unordered_map<std::string, const SegmentRecord*> by_id;
  for (const auto& r : bank.records) by_id.emplace(r.segment_id, &r);
  std::vector<ActionLabel> out;
  out.reserve(segment_ids.size());
  for (const auto& id : segment_ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw ValidationError("segment '" + id + "' not found in label bank");
    const auto& r = *it->second;
    if (!r.verb_label || !r.noun_label) throw ValidationError("segment '" + id + "' lacks a verb or noun label");
    out.push_back({*r.verb_label, *r.noun_label});
  }
  return out;
}

ActionEvaluation score_actions_for_bank(const ScoreTable& verb_table, const ScoreTable& noun_table,
                                        const ActionPrior& prior, std::span<const ActionLabel> labels) {
  verb_table.validate();
  noun_table.validate();
  if (verb_table.space != ScoreSpace::verb) throw ValidationError("expected a verb score table");
  if (noun_table.space != ScoreSpace::noun) throw ValidationError("expected a noun score table");
  require_aligned(verb_table, noun_table, "actions");
  if (labels.size() != verb_table.rows.size())
    throw ValidationError("actions: " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(verb_table.rows.size()) + " segments");
  if (verb_table.vocab_size != prior.verb_vocab() || noun_table.vocab_size != prior.noun_vocab())
    throw ValidationError("actions: prior vocab " + std::to_string(prior.verb_vocab()) + "x" +
                          std::to_string(prior.noun_vocab()) + " does not match tables " +
                          std::to_string(verb_table.vocab_size) + "x" + std::to_string(noun_table.vocab_size));

  const ActionPrior ones = ActionPrior::all_ones(prior.verb_vocab(), prior.noun_vocab());
  ActionEvaluation out;
  for (ScoreTable* t : {&out.reweighted, &out.plain}) {
    t->space = ScoreSpace::action;
    t->verb_vocab = prior.verb_vocab();
    t->noun_vocab = prior.noun_vocab();
    t->vocab_size = t->verb_vocab * t->noun_vocab;
    t->segment_ids = verb_table.segment_ids;
  }
  std::vector<int> action_labels;
  action_labels.reserve(labels.size());
  for (std::size_t i = 0; i < verb_table.rows.size(); ++i) {
    out.reweighted.rows.push_back(reweight_actions(verb_table.rows[i], noun_table.rows[i], prior));
    out.plain.rows.push_back(reweight_actions(verb_table.rows[i], noun_table.rows[i], ones));
    const auto& l = labels[i];
    if (l.verb < 0 || l.verb >= prior.verb_vocab() || l.noun < 0 || l.noun >= prior.noun_vocab())
      throw std::out_of_range("actions: label out of range for segment '" + verb_table.segment_ids[i] + "'");
    action_labels.push_back(l.verb * prior.noun_vocab() + l.noun);
  }
  const int k5 = std::min(5, out.plain.vocab_size);
  out.reweighted_accuracy = {topk_accuracy(out.reweighted, action_labels, 1),
                             topk_accuracy(out.reweighted, action_labels, k5)};
  out.plain_accuracy = {topk_accuracy(out.plain, action_labels, 1), topk_accuracy(out.plain, action_labels, k5)};
  return out;
}

// ---------------------------------------------------------------------------
// I/O

namespace {

bool has_whitespace(const std::string& s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

std::vector<std::string> tokens(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

}  // namespace

void write_score_table(std::ostream& out, const ScoreTable& table) {
  table.validate();
  out << to_string(table.space) << ' ' << table.vocab_size;
  if (table.space == ScoreSpace::action) out << ' ' << table.verb_vocab << ' ' << table.noun_vocab;
  out << '\n';
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    if (table.segment_ids[i].empty() || has_whitespace(table.segment_ids[i]))
      throw ValidationError("score table: segment id '" + table.segment_ids[i] + "' is empty or contains whitespace");
    out << table.segment_ids[i];
    for (double x : table.rows[i]) out << ' ' << format_double(x);
    out << '\n';
  }
}

ScoreTable read_score_table(std::istream& in) {
  ScoreTable t;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tok = tokens(line);
    if (tok.empty()) continue;
    try {
      if (!header) {
        t.space = parse_score_space(tok[0]);
        const std::size_t expected = t.space == ScoreSpace::action ? 4 : 2;
        if (tok.size() != expected) throw ValidationError("malformed header");
        t.vocab_size = static_cast<int>(parse_long(tok[1]));
        if (t.space == ScoreSpace::action) {
          t.verb_vocab = static_cast<int>(parse_long(tok[2]));
          t.noun_vocab = static_cast<int>(parse_long(tok[3]));
        }
        header = true;
        continue;
      }
      if (tok.size() != static_cast<std::size_t>(t.vocab_size) + 1)
        throw ValidationError("expected " + std::to_string(t.vocab_size) + " scores, got " +
                              std::to_string(tok.size() - 1));
      std::vector<double> row;
      row.reserve(tok.size() - 1);
      for (std::size_t i = 1; i < tok.size(); ++i) row.push_back(parse_double(tok[i]));
      t.segment_ids.push_back(tok[0]);
      t.rows.emplace_back(std::move(row));
    } catch (const std::exception& e) {
      throw ValidationError("score table line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!header) throw ValidationError("score table: missing header");
  t.validate();
  return t;
}

void save_score_table(const std::filesystem::path& path, const ScoreTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write score table '" + path.string() + "'");
  write_score_table(out, table);
}

ScoreTable load_score_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open score table '" + path.string() + "'");
  return read_score_table(in);
}

void write_prior(std::ostream& out, const ActionPrior& prior) {
  out << "# verbs " << prior.verb_vocab() << " nouns " << prior.noun_vocab() << '\n';
  for (const auto& [pair, mu] : prior.entries())
    out << pair.first << ' ' << pair.second << ' ' << format_double(mu) << '\n';
}

ActionPrior read_prior(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::optional<ActionPrior> prior;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tok = tokens(line);
    if (tok.empty()) continue;
    try {
      if (tok[0] == "#") {
        if (!prior && tok.size() == 5 && tok[1] == "verbs" && tok[3] == "nouns")
          prior.emplace(static_cast<int>(parse_long(tok[2])), static_cast<int>(parse_long(tok[4])));
        continue;
      }
      if (!prior) throw ValidationError("missing '# verbs <V> nouns <N>' header");
      if (tok.size() != 3) throw ValidationError("expected 'verb_id noun_id frequency'");
      const double mu = parse_double(tok[2]);
      if (!(mu > 0.0)) throw ValidationError("frequency must be > 0");
      prior->set(static_cast<int>(parse_long(tok[0])), static_cast<int>(parse_long(tok[1])), mu);
    } catch (const std::exception& e) {
      throw ValidationError("prior line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!prior) throw ValidationError("prior: missing header");
  return *prior;
}

void save_prior(const std::filesystem::path& path, const ActionPrior& prior) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write prior '" + path.string() + "'");
  write_prior(out, prior);
}

ActionPrior load_prior(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open prior '" + path.string() + "'");
  return read_prior(in);
}

}  // namespace gatefuse
