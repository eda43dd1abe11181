// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "gatefuse/model.hpp"
#include "test_support.hpp"

using namespace gatefuse;
using gatefuse::testing::random_matrix;
using gatefuse::testing::random_vector;

namespace {

Model random_model(FusionKind fusion, std::size_t dv, std::size_t dob, std::size_t classes, const ScaleMode& scale,
                   std::mt19937_64& rng) {
  Model m = init_model(fusion, dv, dob, classes, scale, rng);
  if (m.gfa) m.gfa->b = random_vector(m.gfa->b.dim(), rng, -0.5, 0.5);
  m.head.b = random_vector(classes, rng, -0.5, 0.5);
  return m;
}

}  // namespace

TEST_CASE("softmax") {
  const Vector p = softmax({0, 0, 0});
  for (double x : p) CHECK(x == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const Vector big = softmax({1000, 0});
  CHECK(big[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::isfinite(big[1]));
  const Vector shifted = softmax({1001, 1000, 999});
  const Vector plain = softmax({2, 1, 0});
  for (std::size_t i = 0; i < 3; ++i) CHECK(shifted[i] == doctest::Approx(plain[i]).epsilon(1e-14));
}

TEST_CASE("cross entropy") {
  CHECK(cross_entropy({0.25, 0.75}, 1) == doctest::Approx(-std::log(0.75)));
  CHECK(cross_entropy({1.0, 0.0}, 1) == doctest::Approx(-std::log(1e-12)));
  CHECK_THROWS_AS(cross_entropy({0.5, 0.5}, 2), std::out_of_range);
  CHECK_THROWS_AS(cross_entropy({0.5, 0.5}, -1), std::out_of_range);

  const Vector g = softmax_cross_entropy_grad({0.2, 0.3, 0.5}, 2);
  CHECK(g[0] == doctest::Approx(0.2));
  CHECK(g[1] == doctest::Approx(0.3));
  CHECK(g[2] == doctest::Approx(-0.5));
  CHECK(softmax_cross_entropy_grad({1.0, 0.0}, 1) == Vector{1, -1});
}

TEST_CASE("feature dims per fusion kind") {
  std::mt19937_64 rng(1);
  CHECK(init_model(FusionKind::clip_only, 4, 3, 2, {}, rng).feature_dim() == 4);
  CHECK(init_model(FusionKind::concat, 4, 3, 2, {}, rng).feature_dim() == 7);
  CHECK(init_model(FusionKind::gfa_a, 4, 3, 2, ScaleMode::norm(), rng).feature_dim() == 7);
  CHECK(init_model(FusionKind::gfa_b, 4, 3, 2, {}, rng).feature_dim() == 4);
  CHECK_FALSE(init_model(FusionKind::concat, 4, 3, 2, {}, rng).gfa.has_value());
}

TEST_CASE("gfa-b with a zero gate is clip-only with a halved head") {
  std::mt19937_64 rng(2);
  Model gated = init_model(FusionKind::gfa_b, 5, 3, 4, {}, rng);
  gated.gfa->w = Matrix(5, 3);
  gated.gfa->b = Vector(5);
  gated.head.b = random_vector(4, rng);
  Model clip = init_model(FusionKind::clip_only, 5, 3, 4, {}, rng);
  clip.head.b = gated.head.b;
  std::vector<double> half(gated.head.w.raw());
  for (double& x : half) x *= 0.5;
  clip.head.w = Matrix(4, 5, half);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector v = random_vector(5, rng);
    const Vector o = random_vector(3, rng);
    const Vector a = forward_model(gated, v, o).scores;
    const Vector b = forward_model(clip, v, o).scores;
    for (std::size_t i = 0; i < 4; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-14));
  }
}

TEST_CASE("clip-only ignores the object feature") {
  std::mt19937_64 rng(3);
  const Model m = init_model(FusionKind::clip_only, 3, 2, 3, {}, rng);
  const Vector v{1, 2, 3};
  CHECK(forward_model(m, v, {5, 5}).scores == forward_model(m, v, {-9, 0}).scores);
  const auto lg = loss_and_grads(m, v, {5, 5}, 1);
  CHECK(lg.grads.d_o == Vector{0, 0});
}

TEST_CASE("sgd with momentum") {
  std::vector<double> p{1.0, -2.0};
  const std::vector<double> g{0.5, 0.25};
  std::vector<double> vel{0.0, 0.0};
  const double lr = 0.1;
  sgd_momentum_step(p, g, vel, lr, 0.9);
  CHECK(p[0] == doctest::Approx(1.0 - lr * 0.5).epsilon(1e-15));
  const std::vector<double> after_one = p;
  sgd_momentum_step(p, g, vel, lr, 0.9);
  for (std::size_t i = 0; i < 2; ++i) CHECK(after_one[i] - p[i] == doctest::Approx(lr * 1.9 * g[i]).epsilon(1e-14));

  std::vector<double> q{1.0, 1.0};
  sgd_momentum_step(q, g, vel, 0.0, 0.9);
  CHECK(q == std::vector<double>{1.0, 1.0});
}

TEST_CASE("model-level step can freeze the aggregator") {
  std::mt19937_64 rng(4);
  Model m = random_model(FusionKind::gfa_a, 3, 2, 2, ScaleMode::norm(), rng);
  const Model before = m;
  const auto lg = loss_and_grads(m, random_vector(3, rng), random_vector(2, rng), 0);
  ParamGrads vel = ParamGrads::zeros_like(m);
  sgd_momentum_step(m, lg.grads.params, vel, 0.1, 0.9, false);
  CHECK(m.gfa == before.gfa);
  CHECK_FALSE(m.head == before.head);
  sgd_momentum_step(m, lg.grads.params, vel, 0.1, 0.9, true);
  CHECK_FALSE(m.gfa == before.gfa);
}

TEST_CASE("grad check") {
  std::mt19937_64 rng(5);
  SUBCASE("every fusion kind stays below 1e-5") {
    const std::vector<std::pair<FusionKind, ScaleMode>> kinds{{FusionKind::clip_only, {}},
                                                              {FusionKind::concat, {}},
                                                              {FusionKind::gfa_a, ScaleMode::divide(2.0)},
                                                              {FusionKind::gfa_a, ScaleMode::norm()},
                                                              {FusionKind::gfa_b, {}}};
    for (const auto& [fusion, scale] : kinds) {
      for (int trial = 0; trial < 5; ++trial) {
        const Model m = random_model(fusion, 6, 4, 3, scale, rng);
        const auto report = grad_check(m, random_vector(6, rng), random_vector(4, rng), trial % 3);
        CHECK_MESSAGE(report.max_rel_error < 1e-5, to_string(fusion));
      }
    }
  }
  SUBCASE("clip-only is nearly exact") {
    const Model m = random_model(FusionKind::clip_only, 6, 4, 3, {}, rng);
    CHECK(grad_check(m, random_vector(6, rng), random_vector(4, rng), 1).max_rel_error < 1e-7);
  }
  SUBCASE("a coarse step is measurably worse") {
    const Model m = random_model(FusionKind::gfa_a, 6, 4, 3, ScaleMode::norm(), rng);
    const Vector v = random_vector(6, rng);
    const Vector o = random_vector(4, rng);
    CHECK(grad_check(m, v, o, 0, 1e-2).max_rel_error > grad_check(m, v, o, 0, 1e-5).max_rel_error);
  }
  SUBCASE("report names every group") {
    const Model m = random_model(FusionKind::gfa_b, 3, 2, 2, {}, rng);
    const auto report = grad_check(m, random_vector(3, rng), random_vector(2, rng), 0);
    std::vector<std::string> names;
    for (const auto& g : report.groups) names.push_back(g.name);
    CHECK(names == std::vector<std::string>{"gfa.W", "gfa.b", "head.W", "head.b", "input.v", "input.o"});
  }
}

TEST_CASE("param grads arithmetic") {
  std::mt19937_64 rng(6);
  const Model m = random_model(FusionKind::gfa_b, 2, 2, 2, {}, rng);
  ParamGrads a = ParamGrads::zeros_like(m);
  CHECK(a.l2_norm() == 0.0);
  a.head_b = Vector{3, 4};
  a.add(a);
  a.scale(0.5);
  CHECK(a.head_b == Vector{3, 4});
  CHECK(a.l2_norm() == 5.0);
}

TEST_CASE("model validation") {
  std::mt19937_64 rng(7);
  Model m = init_model(FusionKind::concat, 3, 2, 2, {}, rng);
  m.gfa = zero_gfa_params(GfaVariant::B, 3, 2);
  CHECK_THROWS(m.validate());
  Model n = init_model(FusionKind::gfa_a, 3, 2, 2, ScaleMode::norm(), rng);
  n.head.w = random_matrix(2, 3, rng);
  CHECK_THROWS(n.validate());
  CHECK_THROWS_AS(parse_fusion_kind("gfa-c"), std::invalid_argument);
  CHECK(parse_fusion_kind("clip-only") == FusionKind::clip_only);
}
