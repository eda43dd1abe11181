// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <sstream>

#include "gatefuse/checkpoint.hpp"
#include "test_support.hpp"

using namespace gatefuse;

namespace {

Checkpoint sample(FusionKind fusion, const ScaleMode& scale) {
  std::mt19937_64 rng(11);
  Checkpoint c;
  c.target = Target::verb;
  c.spec = {fusion, scale, {7, 3}};
  c.train.epochs = 12;
  c.train.seed = 99;
  c.model = init_model(fusion, 4, 3, 5, scale, rng);
  c.model.head.b = gatefuse::testing::random_vector(5, rng);
  return c;
}

}  // namespace

TEST_CASE("checkpoints round-trip exactly") {
  for (const auto& [fusion, scale] :
       std::vector<std::pair<FusionKind, ScaleMode>>{{FusionKind::clip_only, {}},
                                                     {FusionKind::concat, {}},
                                                     {FusionKind::gfa_a, ScaleMode::norm_divide(3.25)},
                                                     {FusionKind::gfa_b, {}}}) {
    const Checkpoint c = sample(fusion, scale);
    std::stringstream ss;
    write_checkpoint(ss, c);
    const Checkpoint back = read_checkpoint(ss);
    CHECK(back == c);
    CHECK(back.spec.aggregation.k == 7);
    CHECK(back.spec.aggregation.window == 3);
    CHECK(back.spec.scale == c.spec.scale);
    CHECK(back.train.seed == 99);
    CHECK(back.train.epochs == 12);
  }
  const auto dir = gatefuse::testing::scratch_dir("checkpoint");
  const Checkpoint c = sample(FusionKind::gfa_a, ScaleMode::norm());
  save_checkpoint(dir / "m.json", c);
  CHECK(load_checkpoint(dir / "m.json") == c);
}

TEST_CASE("malformed checkpoints are rejected") {
  const Checkpoint c = sample(FusionKind::gfa_a, ScaleMode::norm());
  std::stringstream ss;
  write_checkpoint(ss, c);
  std::string text = ss.str();

  auto expect_reject = [](const std::string& content) {
    std::istringstream in(content);
    CHECK_THROWS_AS(read_checkpoint(in), ValidationError);
  };
  expect_reject("");
  expect_reject("{}");
  expect_reject(text.substr(0, text.size() / 2));
  const auto pos = text.find("\"rows\":");
  REQUIRE(pos != std::string::npos);
  std::string wrong_rows = text;
  const auto digits = wrong_rows.find_first_of("0123456789", pos);
  const auto digits_end = wrong_rows.find_first_not_of("0123456789", digits);
  wrong_rows.replace(digits, digits_end - digits, "9");
  expect_reject(wrong_rows);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/model.json"), ValidationError);
}
