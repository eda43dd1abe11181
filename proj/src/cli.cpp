// SPDX-License-Identifier: Apache-2.0

#include "gatefuse/cli.hpp"

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

#include "gatefuse/action_scoring.hpp"
#include "gatefuse/checkpoint.hpp"
#include "gatefuse/feature_bank.hpp"
#include "gatefuse/synth.hpp"
#include "gatefuse/text_format.hpp"
#include "gatefuse/train.hpp"

#ifndef GATEFUSE_VERSION
#define GATEFUSE_VERSION "dev"
#endif

namespace gatefuse::cli {
namespace {

using nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Option structs. JSON keys equal the long flag names with '-' -> '_', which
// is what lets `--config` merge explicit flags over a recorded manifest.

struct SynthOptions {
  std::uint64_t seed = 0;
  std::string train_out;
  std::string val_out;
  int verbs = 10;
  int nouns = 20;
  std::size_t dim_v = 32;
  std::size_t dim_o = 32;
  int train_size = 500;
  int val_size = 200;
  double noise = 0.1;
  double mismatch = 1.0;
  double clip_noun_weight = 0.0;
  int pairs_per_verb = 0;
  int object_prototypes = 0;
  int frame_span = 4;
  int objects_per_frame = 2;
  int distractors_per_frame = 2;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SynthOptions, seed, train_out, val_out, verbs, nouns, dim_v,
                                                dim_o, train_size, val_size, noise, mismatch, clip_noun_weight,
                                                pairs_per_verb, object_prototypes, frame_span, objects_per_frame,
                                                distractors_per_frame)

struct TrainOptions {
  std::string bank;
  std::string val_bank;
  std::string target;
  std::string fusion = "gfa-a";
  std::string scale = "norm-to-amplitude";
  double divisor = 1.0;
  bool divisor_auto = false;
  double epsilon = 1e-8;
  int k = 10;
  int window = 5;
  double lr = 0.01;
  double momentum = 0.9;
  int epochs = 100;
  int batch = 32;
  std::uint64_t seed = 0;
  bool freeze_gfa = false;
  std::string out;
  std::string history;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainOptions, bank, val_bank, target, fusion, scale, divisor,
                                                divisor_auto, epsilon, k, window, lr, momentum, epochs, batch, seed,
                                                freeze_gfa, out, history)

struct EvalOptions {
  std::string checkpoint;
  std::string bank;
  std::string scores_out;
  std::string report;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EvalOptions, checkpoint, bank, scores_out, report)

struct ActionsOptions {
  std::vector<std::string> verb_scores;
  std::vector<double> verb_weights;
  std::vector<std::string> noun_scores;
  std::vector<double> noun_weights;
  std::string prior;
  std::string prior_bank;
  bool all_ones_prior = false;
  std::string labels_bank;
  int count_threshold = 50;
  std::string prior_out;
  std::string scores_out;
  std::string report;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ActionsOptions, verb_scores, verb_weights, noun_scores, noun_weights,
                                                prior, prior_bank, all_ones_prior, labels_bank, count_threshold,
                                                prior_out, scores_out, report)

struct GradcheckOptions {
  std::string fusion = "gfa-a";
  std::string scale = "norm-to-amplitude";
  double divisor = 2.0;
  std::size_t dim_v = 6;
  std::size_t dim_o = 4;
  std::size_t classes = 3;
  int instances = 5;
  double step = 1e-5;
  double tolerance = 1e-5;
  std::uint64_t seed = 0;
  std::string out;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GradcheckOptions, fusion, scale, divisor, dim_v, dim_o, classes,
                                                instances, step, tolerance, seed, out)

struct StatsOptions {
  std::string bank;
  int k = 10;
  int window = 5;
  int count_threshold = 50;
  std::string out;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(StatsOptions, bank, k, window, count_threshold, out)

/// What a command touched, for the manifest.
struct RunRecord {
  std::optional<std::uint64_t> seed;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  int exit_code = kExitOk;
};

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string("missing required flag ") + flag);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("config '" + path + "': " + e.what());
  }
}

std::string key_for(const CLI::Option& opt) {
  std::string key = opt.get_single_name();
  for (char& c : key)
    if (c == '-') c = '_';
  return key;
}

/// Explicit flags win over the manifest's recorded config.
template <typename Options>
Options resolve(const CLI::App& sub, const Options& parsed, const std::string& config_path,
                const std::string& command) {
  if (config_path.empty()) return parsed;
  const json manifest = read_json_file(config_path);
  if (!manifest.contains("command") || manifest.at("command") != command)
    throw UsageError("config '" + config_path + "' is not a '" + command + "' manifest");
  json merged = manifest.at("config");
  const json given = parsed;
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->count() == 0) continue;
    const std::string key = key_for(*opt);
    if (given.contains(key)) merged[key] = given.at(key);
  }
  try {
    return merged.get<Options>();
  } catch (const json::exception& e) {
    throw UsageError("config '" + config_path + "': " + e.what());
  }
}

void write_manifest(const std::string& path, const std::string& command, const json& config, const RunRecord& rec,
                    double seconds) {
  json m;
  m["command"] = command;
  m["config"] = config;
  m["seed"] = rec.seed ? json(*rec.seed) : json(nullptr);
  m["inputs"] = rec.inputs;
  m["outputs"] = rec.outputs;
  m["tool_version"] = GATEFUSE_VERSION;
  m["wall_clock_seconds"] = seconds;
  m["exit_code"] = rec.exit_code;
  write_text(path, m.dump(2) + "\n");
}

json topk_json(const TopK& t) { return {{"top1", t.top1}, {"top5", t.top5}}; }

// ---------------------------------------------------------------------------
// Commands

RunRecord cmd_synth(const SynthOptions& o, std::ostream& out) {
  require(o.train_out, "--train-out");
  require(o.val_out, "--val-out");
  SynthSpec spec;
  spec.verbs = o.verbs;
  spec.nouns = o.nouns;
  spec.dim_v = o.dim_v;
  spec.dim_o = o.dim_o;
  spec.train_size = o.train_size;
  spec.val_size = o.val_size;
  spec.noise = o.noise;
  spec.mismatch = o.mismatch;
  spec.clip_noun_weight = o.clip_noun_weight;
  spec.pairs_per_verb = o.pairs_per_verb;
  spec.object_prototypes = o.object_prototypes;
  spec.frame_span = o.frame_span;
  spec.objects_per_frame = o.objects_per_frame;
  spec.distractors_per_frame = o.distractors_per_frame;
  const SynthSplit split = synth_generate_split(spec, o.seed);
  save_feature_bank(o.train_out, split.train);
  save_feature_bank(o.val_out, split.val);
  out << "wrote " << split.train.records.size() << " train and " << split.val.records.size()
      << " val segments\n";
  return {o.seed, {}, {o.train_out, o.val_out}};
}

RunRecord cmd_train(const TrainOptions& o, std::ostream& out) {
  require(o.bank, "--bank");
  require(o.target, "--target");
  require(o.out, "--out");
  const FeatureBank bank = load_feature_bank(o.bank);
  std::optional<FeatureBank> val;
  if (!o.val_bank.empty()) val = load_feature_bank(o.val_bank);

  Checkpoint ckpt;
  ckpt.target = parse_target(o.target);
  ckpt.spec.fusion = parse_fusion_kind(o.fusion);
  ckpt.spec.aggregation = {o.k, o.window};
  ckpt.spec.aggregation.validate();
  if (ckpt.spec.fusion == FusionKind::gfa_a) {
    ckpt.spec.scale.kind = parse_scale_kind(o.scale);
    ckpt.spec.scale.epsilon = o.epsilon;
    ckpt.spec.scale.divisor = o.divisor;
    if (o.divisor_auto) {
      std::vector<Vector> clips;
      for (const auto& r : bank.records) clips.push_back(r.clip_feature);
      ckpt.spec.scale.divisor = estimate_scalar_divisor(clips, aggregate_bank(bank, ckpt.spec.aggregation));
    }
    ckpt.spec.scale.validate();
  }
  ckpt.train.learning_rate = o.lr;
  ckpt.train.momentum = o.momentum;
  ckpt.train.epochs = o.epochs;
  ckpt.train.batch_size = o.batch;
  ckpt.train.seed = o.seed;
  ckpt.train.train_gfa = !o.freeze_gfa;

  TrainResult result = train(bank, ckpt.target, ckpt.spec, ckpt.train, val ? &*val : nullptr);
  ckpt.model = std::move(result.model);
  save_checkpoint(o.out, ckpt);

  RunRecord rec{o.seed, {o.bank}, {o.out}};
  if (val) rec.inputs.push_back(o.val_bank);
  if (!o.history.empty()) {
    std::string csv = "epoch,mean_loss,mean_grad_norm,val_top1\n";
    for (const auto& e : result.history) {
      csv += std::to_string(e.epoch) + "," + format_double(e.mean_loss) + "," + format_double(e.mean_grad_norm) + ",";
      if (e.val_top1) csv += format_double(*e.val_top1);
      csv += "\n";
    }
    write_text(o.history, csv);
    rec.outputs.push_back(o.history);
  }
  const auto& last = result.history.back();
  out << "trained " << to_string(ckpt.spec.fusion) << " " << to_string(ckpt.target) << " model: final loss "
      << format_double(last.mean_loss);
  if (last.val_top1) out << ", val top-1 " << format_double(*last.val_top1);
  out << "\n";
  return rec;
}

RunRecord cmd_eval(const EvalOptions& o, std::ostream& out) {
  require(o.checkpoint, "--checkpoint");
  require(o.bank, "--bank");
  require(o.scores_out, "--scores-out");
  const Checkpoint ckpt = load_checkpoint(o.checkpoint);
  const FeatureBank bank = load_feature_bank(o.bank);
  const int vocab = ckpt.target == Target::verb ? bank.verb_vocab_size : bank.noun_vocab_size;
  if (static_cast<std::size_t>(vocab) != ckpt.model.num_classes())
    throw ValidationError("checkpoint has " + std::to_string(ckpt.model.num_classes()) + " " +
                          to_string(ckpt.target) + " classes but bank declares " + std::to_string(vocab));
  if (bank.records.empty()) throw ValidationError("eval: empty feature bank");

  ScoreTable table;
  table.space = ckpt.target == Target::verb ? ScoreSpace::verb : ScoreSpace::noun;
  table.vocab_size = vocab;
  for (const auto& r : bank.records) table.segment_ids.push_back(r.segment_id);
  table.rows = predict_probabilities(ckpt.model, bank, ckpt.spec.aggregation);
  save_score_table(o.scores_out, table);

  json report = {{"target", to_string(ckpt.target)},
                 {"fusion_kind", to_string(ckpt.model.fusion)},
                 {"segments", bank.records.size()}};
  const bool labelled = std::all_of(bank.records.begin(), bank.records.end(), [&](const SegmentRecord& r) {
    return (ckpt.target == Target::verb ? r.verb_label : r.noun_label).has_value();
  });
  if (labelled) {
    const auto labels = target_labels(bank, ckpt.target);
    report["top1"] = topk_accuracy(table, labels, 1);
    report["top5"] = topk_accuracy(table, labels, std::min(5, vocab));
    out << to_string(ckpt.target) << " top-1 " << format_double(report["top1"].get<double>()) << ", top-5 "
        << format_double(report["top5"].get<double>()) << "\n";
  } else {
    report["top1"] = nullptr;
    report["top5"] = nullptr;
    out << "bank is unlabelled; wrote scores only\n";
  }
  RunRecord rec{ckpt.train.seed, {o.checkpoint, o.bank}, {o.scores_out}};
  if (!o.report.empty()) {
    write_text(o.report, report.dump(2) + "\n");
    rec.outputs.push_back(o.report);
  }
  return rec;
}

ScoreTable fused_table(const std::vector<std::string>& paths, std::vector<double> weights, const char* flag,
                       std::vector<std::string>& inputs) {
  if (paths.empty()) throw UsageError(std::string("missing required flag ") + flag);
  if (weights.empty()) weights.assign(paths.size(), 1.0);
  if (weights.size() != paths.size())
    throw UsageError(std::string(flag) + ": " + std::to_string(paths.size()) + " tables but " +
                     std::to_string(weights.size()) + " weights");
  std::vector<ScoreTable> tables;
  for (const auto& p : paths) {
    tables.push_back(load_score_table(p));
    inputs.push_back(p);
  }
  if (tables.size() == 1) return tables.front();
  return late_fuse(tables, weights);
}

RunRecord cmd_actions(const ActionsOptions& o, std::ostream& out) {
  require(o.labels_bank, "--labels-bank");
  const int prior_sources = int(!o.prior.empty()) + int(!o.prior_bank.empty()) + int(o.all_ones_prior);
  if (prior_sources != 1) throw UsageError("give exactly one of --prior, --prior-bank, --all-ones-prior");

  RunRecord rec;
  const ScoreTable verbs = fused_table(o.verb_scores, o.verb_weights, "--verb-scores", rec.inputs);
  const ScoreTable nouns = fused_table(o.noun_scores, o.noun_weights, "--noun-scores", rec.inputs);
  const FeatureBank labels_bank = load_feature_bank(o.labels_bank);
  rec.inputs.push_back(o.labels_bank);

  json report;
  ActionPrior prior;
  if (!o.prior.empty()) {
    prior = load_prior(o.prior);
    rec.inputs.push_back(o.prior);
  } else if (!o.prior_bank.empty()) {
    const FeatureBank prior_bank = load_feature_bank(o.prior_bank);
    rec.inputs.push_back(o.prior_bank);
    prior = compute_prior(prior_bank);
    report["prior"] = {{"pairs", prior.entries().size()},
                       {"count_threshold", o.count_threshold},
                       {"pairs_above_threshold", pairs_above_count(prior_bank, o.count_threshold)}};
  } else {
    prior = ActionPrior::all_ones(verbs.vocab_size, nouns.vocab_size);
  }
  if (!o.prior_out.empty()) {
    save_prior(o.prior_out, prior);
    rec.outputs.push_back(o.prior_out);
  }

  const auto labels = labels_for(labels_bank, verbs.segment_ids);
  const ActionEvaluation eval = score_actions_for_bank(verbs, nouns, prior, labels);
  std::vector<int> verb_labels;
  std::vector<int> noun_labels;
  for (const auto& l : labels) {
    verb_labels.push_back(l.verb);
    noun_labels.push_back(l.noun);
  }
  report["verb"] = topk_json({topk_accuracy(verbs, verb_labels, 1),
                              topk_accuracy(verbs, verb_labels, std::min(5, verbs.vocab_size))});
  report["noun"] = topk_json({topk_accuracy(nouns, noun_labels, 1),
                              topk_accuracy(nouns, noun_labels, std::min(5, nouns.vocab_size))});
  report["action"] = {{"reweighted", topk_json(eval.reweighted_accuracy)},
                      {"plain", topk_json(eval.plain_accuracy)}};
  report["segments"] = labels.size();

  if (!o.scores_out.empty()) {
    save_score_table(o.scores_out, eval.reweighted);
    rec.outputs.push_back(o.scores_out);
  }
  if (!o.report.empty()) {
    write_text(o.report, report.dump(2) + "\n");
    rec.outputs.push_back(o.report);
  }
  out << "action top-1 re-weighted " << format_double(eval.reweighted_accuracy.top1) << ", plain "
      << format_double(eval.plain_accuracy.top1) << "\n";
  return rec;
}

RunRecord cmd_gradcheck(const GradcheckOptions& o, std::ostream& out) {
  const FusionKind fusion = parse_fusion_kind(o.fusion);
  if (o.dim_v == 0 || o.dim_o == 0 || o.classes == 0) throw UsageError("dims and classes must be positive");
  if (o.instances < 1) throw UsageError("--instances must be >= 1");
  if (!(o.tolerance > 0.0)) throw UsageError("--tolerance must be positive");
  ScaleMode scale;
  if (fusion == FusionKind::gfa_a) {
    scale.kind = parse_scale_kind(o.scale);
    scale.divisor = o.divisor;
    scale.validate();
  }

  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> input(-2.0, 2.0);
  std::uniform_real_distribution<double> bias(-0.5, 0.5);
  std::uniform_int_distribution<std::size_t> pick_label(0, o.classes - 1);
  std::vector<GradCheckGroup> worst;
  for (int i = 0; i < o.instances; ++i) {
    Model m = init_model(fusion, o.dim_v, o.dim_o, o.classes, scale, rng);
    if (m.gfa)
      for (double& b : m.gfa->b.values()) b = bias(rng);
    for (double& b : m.head.b.values()) b = bias(rng);
    std::vector<double> v(o.dim_v);
    std::vector<double> ob(o.dim_o);
    for (double& x : v) x = input(rng);
    for (double& x : ob) x = input(rng);
    const int label = static_cast<int>(pick_label(rng));
    const GradCheckReport r = grad_check(m, Vector(v), Vector(ob), label, o.step);
    if (worst.empty()) worst = r.groups;
    for (std::size_t g = 0; g < r.groups.size(); ++g)
      worst[g].max_rel_error = std::max(worst[g].max_rel_error, r.groups[g].max_rel_error);
  }

  bool pass = true;
  json groups = json::object();
  for (const auto& g : worst) {
    const bool ok = g.max_rel_error < o.tolerance;
    pass = pass && ok;
    groups[g.name] = {{"max_rel_error", g.max_rel_error}, {"pass", ok}};
    out << (ok ? "PASS " : "FAIL ") << g.name << " max rel. error " << format_double(g.max_rel_error) << "\n";
  }
  out << (pass ? "gradcheck passed" : "gradcheck FAILED") << " (tolerance " << format_double(o.tolerance) << ")\n";

  RunRecord rec{o.seed, {}, {}};
  if (!o.out.empty()) {
    const json report = {{"fusion_kind", o.fusion}, {"tolerance", o.tolerance}, {"pass", pass}, {"groups", groups}};
    write_text(o.out, report.dump(2) + "\n");
    rec.outputs.push_back(o.out);
  }
  rec.exit_code = pass ? kExitOk : kExitUsage;
  return rec;
}

RunRecord cmd_stats(const StatsOptions& o, std::ostream& out) {
  require(o.bank, "--bank");
  const FeatureBank bank = load_feature_bank(o.bank);
  const AggregationConfig agg{o.k, o.window};
  agg.validate();
  const auto objects = aggregate_bank(bank, agg);
  double sum_v = 0.0;
  double sum_o = 0.0;
  double sum_det = 0.0;
  std::size_t detections = 0;
  for (std::size_t i = 0; i < bank.records.size(); ++i) {
    sum_v += l2_norm(bank.records[i].clip_feature);
    sum_o += l2_norm(objects[i]);
    for (const auto& d : bank.records[i].detections) {
      sum_det += l2_norm(d.feature);
      ++detections;
    }
  }
  const auto n = static_cast<double>(std::max<std::size_t>(bank.records.size(), 1));
  json stats = {{"segments", bank.records.size()},
                {"dim_v", bank.dim_v},
                {"dim_o", bank.dim_o},
                {"verb_vocab_size", bank.verb_vocab_size},
                {"noun_vocab_size", bank.noun_vocab_size},
                {"detections", detections},
                {"mean_clip_norm", sum_v / n},
                {"mean_object_norm", sum_o / n},
                {"mean_detection_norm", detections ? sum_det / static_cast<double>(detections) : 0.0},
                {"amplitude_ratio", sum_v > 0.0 ? sum_o / sum_v : 0.0}};
  const bool labelled = !bank.records.empty() &&
                        std::all_of(bank.records.begin(), bank.records.end(),
                                    [](const SegmentRecord& r) { return r.verb_label && r.noun_label; });
  if (labelled) {
    stats["action_pairs"] = compute_prior(bank).entries().size();
    stats["count_threshold"] = o.count_threshold;
    stats["pairs_above_threshold"] = pairs_above_count(bank, o.count_threshold);
  }
  out << stats.dump(2) << "\n";
  RunRecord rec{std::nullopt, {o.bank}, {}};
  if (!o.out.empty()) {
    write_text(o.out, stats.dump(2) + "\n");
    rec.outputs.push_back(o.out);
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Wiring

struct Common {
  std::string config;
  std::string manifest;
};

void add_common(CLI::App& sub, Common& c) {
  sub.add_option("--config", c.config, "Replay a run manifest; explicit flags override its values");
  sub.add_option("--manifest", c.manifest, "Where to write this run's manifest");
}

template <typename Options>
int execute(const std::string& command, const CLI::App& sub, const Options& parsed, const Common& common,
            const std::string& default_manifest, RunRecord (*fn)(const Options&, std::ostream&),
            std::ostream& out) {
  const Options opts = resolve(sub, parsed, common.config, command);
  const auto start = std::chrono::steady_clock::now();
  RunRecord rec = fn(opts, out);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!common.config.empty()) rec.inputs.push_back(common.config);
  std::string manifest = common.manifest;
  if (manifest.empty()) manifest = rec.outputs.empty() ? default_manifest : rec.outputs.front() + ".manifest.json";
  write_manifest(manifest, command, json(opts), rec, seconds);
  return rec.exit_code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gated feature aggregation for verb/noun/action recognition on feature banks"};
  app.name(args.empty() ? "gatefuse" : args.front());
  app.require_subcommand(1);
  app.set_version_flag("--version", GATEFUSE_VERSION);

  SynthOptions synth;
  Common synth_c;
  auto* s = app.add_subcommand("synth", "Generate synthetic train/val feature banks");
  s->add_option("--seed", synth.seed, "RNG seed");
  s->add_option("--train-out", synth.train_out, "Training bank path (required)");
  s->add_option("--val-out", synth.val_out, "Validation bank path (required)");
  s->add_option("--verbs", synth.verbs, "Verb vocabulary size");
  s->add_option("--nouns", synth.nouns, "Noun vocabulary size");
  s->add_option("--dim-v", synth.dim_v, "Clip feature dim");
  s->add_option("--dim-o", synth.dim_o, "Object feature dim");
  s->add_option("--train-size", synth.train_size, "Training segments");
  s->add_option("--val-size", synth.val_size, "Validation segments");
  s->add_option("--noise", synth.noise, "Per-coordinate noise, relative to prototype RMS");
  s->add_option("--mismatch", synth.mismatch, "Object/clip amplitude ratio");
  s->add_option("--clip-noun-weight", synth.clip_noun_weight, "Share of the clip feature carrying noun identity");
  s->add_option("--pairs-per-verb", synth.pairs_per_verb, "Nouns each verb co-occurs with (0 = all)");
  s->add_option("--object-prototypes", synth.object_prototypes, "Distinct object prototypes shared by nouns (0 = one per noun)");
  s->add_option("--frame-span", synth.frame_span, "Detections on frames center +- span");
  s->add_option("--objects-per-frame", synth.objects_per_frame, "Object detections per frame");
  s->add_option("--distractors-per-frame", synth.distractors_per_frame, "Background detections per frame");
  add_common(*s, synth_c);

  TrainOptions tr;
  Common tr_c;
  auto* t = app.add_subcommand("train", "Train a verb or noun classifier");
  t->add_option("--bank", tr.bank, "Training bank (required)");
  t->add_option("--val-bank", tr.val_bank, "Validation bank");
  t->add_option("--target", tr.target, "verb | noun (required)");
  t->add_option("--fusion", tr.fusion, "clip-only | concat | gfa-a | gfa-b");
  t->add_option("--scale", tr.scale, "gfa-a scaling: none | scalar-divide | norm-to-amplitude | norm-then-divide");
  t->add_option("--divisor", tr.divisor, "Scalar divisor for scalar-divide modes");
  t->add_flag("--divisor-auto", tr.divisor_auto, "Estimate the divisor as mean|o| / mean|v| on the training bank");
  t->add_option("--epsilon", tr.epsilon, "l2 normalisation floor");
  t->add_option("--k", tr.k, "Top-K detections to pool");
  t->add_option("--window", tr.window, "Context window in frames (odd)");
  t->add_option("--lr", tr.lr, "Learning rate");
  t->add_option("--momentum", tr.momentum, "SGD momentum");
  t->add_option("--epochs", tr.epochs, "Epochs");
  t->add_option("--batch", tr.batch, "Mini-batch size");
  t->add_option("--seed", tr.seed, "RNG seed for init and shuffling");
  t->add_flag("--freeze-gfa", tr.freeze_gfa, "Keep aggregator weights at their initialisation");
  t->add_option("--out", tr.out, "Checkpoint path (required)");
  t->add_option("--history", tr.history, "Per-epoch history CSV");
  add_common(*t, tr_c);

  EvalOptions ev;
  Common ev_c;
  auto* e = app.add_subcommand("eval", "Score a bank with a checkpoint");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint (required)");
  e->add_option("--bank", ev.bank, "Feature bank (required)");
  e->add_option("--scores-out", ev.scores_out, "Score table path (required)");
  e->add_option("--report", ev.report, "Metric report path");
  add_common(*e, ev_c);

  ActionsOptions ac;
  Common ac_c;
  auto* a = app.add_subcommand("actions", "Combine verb and noun scores into re-weighted action scores");
  a->add_option("--verb-scores", ac.verb_scores, "Verb score table(s); several are late-fused");
  a->add_option("--verb-weights", ac.verb_weights, "Late-fusion weights for the verb tables");
  a->add_option("--noun-scores", ac.noun_scores, "Noun score table(s); several are late-fused");
  a->add_option("--noun-weights", ac.noun_weights, "Late-fusion weights for the noun tables");
  a->add_option("--prior", ac.prior, "Prior file");
  a->add_option("--prior-bank", ac.prior_bank, "Compute the prior from this (training) bank");
  a->add_flag("--all-ones-prior", ac.all_ones_prior, "Use mu = 1 everywhere");
  a->add_option("--labels-bank", ac.labels_bank, "Bank holding the true labels (required)");
  a->add_option("--count-threshold", ac.count_threshold, "Report pairs occurring more often than this");
  a->add_option("--prior-out", ac.prior_out, "Write the prior used");
  a->add_option("--scores-out", ac.scores_out, "Write the re-weighted action score table");
  a->add_option("--report", ac.report, "Metric report path");
  add_common(*a, ac_c);

  GradcheckOptions gc;
  Common gc_c;
  auto* g = app.add_subcommand("gradcheck", "Finite-difference check of end-to-end gradients");
  g->add_option("--fusion", gc.fusion, "clip-only | concat | gfa-a | gfa-b");
  g->add_option("--scale", gc.scale, "gfa-a scaling mode");
  g->add_option("--divisor", gc.divisor, "Scalar divisor");
  g->add_option("--dim-v", gc.dim_v, "Clip feature dim");
  g->add_option("--dim-o", gc.dim_o, "Object feature dim");
  g->add_option("--classes", gc.classes, "Classes");
  g->add_option("--instances", gc.instances, "Random instances to check");
  g->add_option("--step", gc.step, "Central difference step");
  g->add_option("--tolerance", gc.tolerance, "Max relative error allowed");
  g->add_option("--seed", gc.seed, "RNG seed");
  g->add_option("--out", gc.out, "JSON report path");
  add_common(*g, gc_c);

  StatsOptions st;
  Common st_c;
  auto* x = app.add_subcommand("stats", "Summarise a feature bank");
  x->add_option("--bank", st.bank, "Feature bank (required)");
  x->add_option("--k", st.k, "Top-K detections to pool");
  x->add_option("--window", st.window, "Context window in frames (odd)");
  x->add_option("--count-threshold", st.count_threshold, "Report pairs occurring more often than this");
  x->add_option("--out", st.out, "JSON output path");
  add_common(*x, st_c);

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& arg : args) argv.push_back(arg.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*s) return execute("synth", *s, synth, synth_c, "synth.manifest.json", &cmd_synth, out);
    if (*t) return execute("train", *t, tr, tr_c, "train.manifest.json", &cmd_train, out);
    if (*e) return execute("eval", *e, ev, ev_c, "eval.manifest.json", &cmd_eval, out);
    if (*a) return execute("actions", *a, ac, ac_c, "actions.manifest.json", &cmd_actions, out);
    if (*g) return execute("gradcheck", *g, gc, gc_c, "gradcheck.manifest.json", &cmd_gradcheck, out);
    if (*x) return execute("stats", *x, st, st_c, "stats.manifest.json", &cmd_stats, out);
  } catch (const UsageError& ex) {
    err << "usage error: " << ex.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  } catch (const ValidationError& ex) {
    err << "validation error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::out_of_range& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "internal error: " << ex.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}

int run(int argc, char** argv) {
  return run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

}  // namespace gatefuse::cli
