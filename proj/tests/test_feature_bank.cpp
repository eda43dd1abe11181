// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "gatefuse/feature_bank.hpp"
#include "test_support.hpp"

using namespace gatefuse;
using gatefuse::testing::random_vector;

namespace {

Detection det(long frame, double score, Vector feature = {0, 0}) { return {frame, score, std::move(feature)}; }

SegmentRecord record_with(long center, std::vector<Detection> dets) {
  SegmentRecord r;
  r.segment_id = "seg";
  r.clip_feature = Vector{1, 2};
  r.clip_center_frame = center;
  r.detections = std::move(dets);
  return r;
}

std::vector<long> frames_of(const std::vector<Detection>& ds) {
  std::vector<long> out;
  for (const auto& d : ds) out.push_back(d.frame_index);
  return out;
}

}  // namespace

TEST_CASE("context window keeps frames within the half-width") {
  const auto r = record_with(100, {det(97, 0.1), det(98, 0.2), det(100, 0.3), det(103, 0.4)});
  CHECK(frames_of(context_window(r, {10, 5})) == std::vector<long>{98, 100});
  CHECK(frames_of(context_window(r, {10, 1})) == std::vector<long>{100});
  CHECK(frames_of(context_window(r, {10, 7})) == std::vector<long>{97, 98, 100, 103});
}

TEST_CASE("aggregation config validation") {
  CHECK_THROWS_AS((AggregationConfig{10, 4}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((AggregationConfig{0, 5}.validate()), std::invalid_argument);
  CHECK_NOTHROW((AggregationConfig{1, 1}.validate()));
}

TEST_CASE("select_top_k ordering and ties") {
  const std::vector<Detection> ds{det(5, 0.5, {1, 0}), det(3, 0.9, {2, 0}), det(4, 0.5, {3, 0}),
                                  det(4, 0.5, {4, 0}), det(1, 0.1, {5, 0})};
  const auto top = select_top_k(ds, 4);
  REQUIRE(top.size() == 4);
  CHECK(top[0].feature == Vector{2, 0});
  CHECK(top[1].feature == Vector{3, 0});  // frame 4 before frame 5, input order within frame 4
  CHECK(top[2].feature == Vector{4, 0});
  CHECK(top[3].feature == Vector{1, 0});
  CHECK(select_top_k(ds, 10).size() == 5);
  CHECK(select_top_k({}, 3).empty());
}

TEST_CASE("maxpool") {
  CHECK(maxpool_features({det(0, 1, {1, 5}), det(0, 1, {3, 2})}, 2) == Vector{3, 5});
  CHECK(maxpool_features({}, 3) == Vector{0, 0, 0});
  CHECK(maxpool_features({det(0, 1, {-1, -5})}, 2) == Vector{-1, -5});
  CHECK_THROWS_AS(maxpool_features({det(0, 1, {1, 2, 3})}, 2), ShapeError);
}

TEST_CASE("empty window aggregates to zero") {
  const auto r = record_with(100, {det(10, 0.9, {4, 4})});
  CHECK(aggregate_object_feature(r, {}, 2) == Vector{0, 0});
  CHECK(aggregate_object_feature(record_with(0, {}), {}, 2) == Vector{0, 0});
}

TEST_CASE("aggregation equals the step-by-step oracle on random records") {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> n_det(0, 30);
  std::uniform_int_distribution<long> offset(-6, 6);
  std::uniform_int_distribution<int> score_bucket(0, 4);  // coarse scores force ties
  std::uniform_int_distribution<int> pick_k(1, 12);
  for (int trial = 0; trial < 50; ++trial) {
    const long center = 1000 + trial;
    std::vector<Detection> ds;
    const int n = n_det(rng);
    for (int i = 0; i < n; ++i) ds.push_back(det(center + offset(rng), score_bucket(rng) / 4.0, random_vector(3, rng)));
    const auto r = record_with(center, ds);
    const AggregationConfig cfg{pick_k(rng), 2 * (trial % 4) + 1};

    // independent oracle: filter, rank by (score desc, frame asc, position asc), max over first k
    const long half = (cfg.window - 1) / 2;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (std::abs(ds[i].frame_index - center) <= half) idx.push_back(i);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (ds[a].score != ds[b].score) return ds[a].score > ds[b].score;
      if (ds[a].frame_index != ds[b].frame_index) return ds[a].frame_index < ds[b].frame_index;
      return a < b;
    });
    if (idx.size() > static_cast<std::size_t>(cfg.k)) idx.resize(static_cast<std::size_t>(cfg.k));
    std::vector<double> expected(3, 0.0);
    for (std::size_t j = 0; j < idx.size(); ++j)
      for (std::size_t c = 0; c < 3; ++c)
        expected[c] = j == 0 ? ds[idx[j]].feature[c] : std::max(expected[c], ds[idx[j]].feature[c]);

    CHECK(aggregate_object_feature(r, cfg, 3) == Vector(expected));
    const auto top = select_top_k(context_window(r, cfg), cfg.k);
    REQUIRE(top.size() == idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) CHECK(top[j] == ds[idx[j]]);
  }
}

namespace {

FeatureBank small_bank() {
  FeatureBank bank;
  bank.dim_v = 2;
  bank.dim_o = 3;
  bank.verb_vocab_size = 4;
  bank.noun_vocab_size = 5;
  SegmentRecord a = record_with(50, {det(49, 0.25, {0.1, 0.2, 0.3}), det(51, 1.0, {1e-300, -2.5, 1.0 / 3.0})});
  a.segment_id = "a";
  a.verb_label = 1;
  a.noun_label = 4;
  SegmentRecord b = record_with(7, {});
  b.segment_id = "b";
  b.clip_feature = Vector{-0.1, 12345.678};
  bank.records = {a, b};
  return bank;
}

}  // namespace

TEST_CASE("feature bank round-trips exactly") {
  const FeatureBank bank = small_bank();
  std::stringstream ss;
  write_feature_bank(ss, bank);
  CHECK(read_feature_bank(ss) == bank);

  const auto dir = gatefuse::testing::scratch_dir("feature_bank_roundtrip");
  save_feature_bank(dir / "bank.jsonl", bank);
  CHECK(load_feature_bank(dir / "bank.jsonl") == bank);
}

TEST_CASE("feature bank validation names the offending record") {
  auto expect_error = [](const FeatureBank& bank, const std::string& fragment) {
    try {
      bank.validate();
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK_MESSAGE(std::string(e.what()).find(fragment) != std::string::npos, e.what());
    }
  };
  FeatureBank bad_dim = small_bank();
  bad_dim.records[1].clip_feature = Vector{1, 2, 3};
  expect_error(bad_dim, "b");

  FeatureBank bad_score = small_bank();
  bad_score.records[0].detections[0].score = 1.5;
  expect_error(bad_score, "a");

  FeatureBank dup = small_bank();
  dup.records[1].segment_id = "a";
  expect_error(dup, "a");

  FeatureBank bad_label = small_bank();
  bad_label.records[0].noun_label = 5;
  expect_error(bad_label, "a");

  FeatureBank bad_obj = small_bank();
  bad_obj.records[0].detections[1].feature = Vector{1, 2};
  expect_error(bad_obj, "a");
}

TEST_CASE("malformed bank files are rejected with the line number") {
  auto expect_line = [](const std::string& text, const std::string& fragment) {
    std::istringstream in(text);
    try {
      read_feature_bank(in);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK_MESSAGE(std::string(e.what()).find(fragment) != std::string::npos, e.what());
    }
  };
  const std::string header = R"({"dim_v":2,"dim_o":1,"verb_vocab_size":2,"noun_vocab_size":2})";
  expect_line("", "header");
  expect_line("not json\n", "line 1");
  expect_line(header + "\n{\"segment_id\":\"x\"}\n", "line 2");
  expect_line(header + "\n" + R"({"segment_id":"x","clip_feature":[1,2],"center":3,"detections":[]})" + "\n[1]\n",
              "line 3");
}
