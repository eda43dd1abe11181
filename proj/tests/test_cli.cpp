// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gatefuse/checkpoint.hpp"
#include "gatefuse/cli.hpp"
#include "test_support.hpp"

using namespace gatefuse;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "gatefuse");
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(run_cli({}).code == cli::kExitUsage);
  CHECK(run_cli({"frobnicate"}).code == cli::kExitUsage);
  CHECK(run_cli({"train", "--target", "noun"}).code == cli::kExitUsage);
  CHECK(run_cli({"gradcheck", "--fusion", "gfa-z"}).code == cli::kExitUsage);
  CHECK(run_cli({"--help"}).code == cli::kExitOk);
  const auto dir = gatefuse::testing::scratch_dir("cli_usage");
  const Result missing = run_cli({"stats", "--bank", (dir / "nope.jsonl").string()});
  CHECK(missing.code == cli::kExitUsage);
  CHECK(missing.err.find("nope.jsonl") != std::string::npos);
}

TEST_CASE("gradcheck reports per group and fails an impossible tolerance") {
  const auto dir = gatefuse::testing::scratch_dir("cli_gradcheck");
  const std::string manifest = (dir / "g.manifest.json").string();
  const Result ok = run_cli({"gradcheck", "--fusion", "gfa-a", "--scale", "norm-to-amplitude", "--manifest", manifest});
  CHECK(ok.code == cli::kExitOk);
  CHECK(ok.out.find("PASS gfa.W") != std::string::npos);
  const Result tight = run_cli({"gradcheck", "--fusion", "gfa-a", "--tolerance", "1e-12", "--manifest", manifest});
  CHECK(tight.code == cli::kExitUsage);
  CHECK(tight.out.find("FAIL") != std::string::npos);

  const auto m = nlohmann::json::parse(slurp(manifest));
  CHECK(m.at("command") == "gradcheck");
  CHECK(m.at("exit_code") == 1);
  CHECK(m.contains("tool_version"));
  CHECK(m.contains("wall_clock_seconds"));
}

TEST_CASE("synth, train, eval, actions and stats chain together") {
  const auto dir = gatefuse::testing::scratch_dir("cli_chain");
  const auto p = [&](const char* name) { return (dir / name).string(); };
  REQUIRE(run_cli({"synth", "--seed", "4", "--train-size", "60", "--val-size", "20", "--verbs", "3", "--nouns", "4",
                   "--dim-v", "6", "--dim-o", "5", "--train-out", p("train.jsonl"), "--val-out", p("val.jsonl")})
              .code == cli::kExitOk);
  CHECK(std::filesystem::exists(p("train.jsonl.manifest.json")));

  for (const char* target : {"verb", "noun"}) {
    const std::string ckpt = p(target) + std::string(".ckpt.json");
    const Result tr = run_cli({"train", "--bank", p("train.jsonl"), "--val-bank", p("val.jsonl"), "--target", target,
                               "--fusion", "gfa-a", "--epochs", "5", "--out", ckpt, "--history",
                               p(target) + std::string(".csv")});
    REQUIRE_MESSAGE(tr.code == cli::kExitOk, tr.err);
    CHECK(load_checkpoint(ckpt).target == parse_target(target));
    CHECK(slurp(p(target) + std::string(".csv")).rfind("epoch,mean_loss,mean_grad_norm,val_top1\n", 0) == 0);
    const Result ev = run_cli({"eval", "--checkpoint", ckpt, "--bank", p("val.jsonl"), "--scores-out",
                               p(target) + std::string(".scores"), "--report", p(target) + std::string(".report.json")});
    REQUIRE_MESSAGE(ev.code == cli::kExitOk, ev.err);
  }

  const Result act = run_cli({"actions", "--verb-scores", p("verb.scores"), "--noun-scores", p("noun.scores"),
                              "--prior-bank", p("train.jsonl"), "--labels-bank", p("val.jsonl"), "--report",
                              p("actions.json"), "--scores-out", p("actions.scores"), "--prior-out", p("prior.txt")});
  REQUIRE_MESSAGE(act.code == cli::kExitOk, act.err);
  const auto report = nlohmann::json::parse(slurp(p("actions.json")));
  CHECK(report.contains("action"));

  const Result both = run_cli({"actions", "--verb-scores", p("verb.scores"), "--noun-scores", p("noun.scores"),
                               "--prior-bank", p("train.jsonl"), "--all-ones-prior", "--labels-bank", p("val.jsonl")});
  CHECK(both.code == cli::kExitUsage);

  const Result stats = run_cli({"stats", "--bank", p("train.jsonl"), "--out", p("stats.json")});
  REQUIRE(stats.code == cli::kExitOk);
  CHECK(nlohmann::json::parse(slurp(p("stats.json"))).at("segments") == 60);
}

TEST_CASE("a manifest replays with flag overrides") {
  const auto dir = gatefuse::testing::scratch_dir("cli_replay");
  const auto p = [&](const char* name) { return (dir / name).string(); };
  REQUIRE(run_cli({"synth", "--seed", "1", "--train-size", "10", "--val-size", "5", "--dim-v", "4", "--dim-o", "4",
                   "--train-out", p("a.jsonl"), "--val-out", p("a_val.jsonl")})
              .code == cli::kExitOk);
  REQUIRE(run_cli({"synth", "--config", p("a.jsonl.manifest.json"), "--train-out", p("b.jsonl"), "--val-out",
                   p("b_val.jsonl")})
              .code == cli::kExitOk);
  CHECK(slurp(p("a.jsonl")) == slurp(p("b.jsonl")));
  REQUIRE(run_cli({"synth", "--config", p("a.jsonl.manifest.json"), "--seed", "2", "--train-out", p("c.jsonl"),
                   "--val-out", p("c_val.jsonl")})
              .code == cli::kExitOk);
  CHECK(slurp(p("a.jsonl")) != slurp(p("c.jsonl")));
  CHECK(load_feature_bank(p("c.jsonl")).records.size() == 10);
}
