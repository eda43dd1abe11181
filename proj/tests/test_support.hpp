// SPDX-License-Identifier: Apache-2.0
//
// Shared test helpers: seeded generators and an extended-precision central
// finite-difference oracle.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gatefuse/tensor.hpp"

namespace gatefuse::testing {

inline std::vector<double> random_values(std::size_t n, std::mt19937_64& rng, double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> out(n);
  for (double& x : out) x = dist(rng);
  return out;
}

inline Vector random_vector(std::size_t n, std::mt19937_64& rng, double lo = -2.0, double hi = 2.0) {
  return Vector(random_values(n, rng, lo, hi));
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = -2.0,
                            double hi = 2.0) {
  return Matrix(rows, cols, random_values(rows * cols, rng, lo, hi));
}

inline double fd_rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

/// Extended-precision reference arithmetic for finite-difference oracles.
/// Central differences of a long double reimplementation keep cancellation
/// error well below the gradient entries under test.
namespace ext {

using Real = long double;
using Vec = std::vector<Real>;

inline Vec widen(std::span<const double> x) { return Vec(x.begin(), x.end()); }

/// y = W x + b with W row-major, rows = b.size().
inline Vec affine(const Vec& x, const Vec& w, const Vec& b) {
  Vec y(b.size());
  for (std::size_t r = 0; r < b.size(); ++r) {
    Real acc = b[r];
    for (std::size_t c = 0; c < x.size(); ++c) acc += w[r * x.size() + c] * x[c];
    y[r] = acc;
  }
  return y;
}

inline Vec sigmoid(Vec x) {
  for (Real& e : x) e = e >= 0 ? 1 / (1 + std::exp(-e)) : std::exp(e) / (1 + std::exp(e));
  return x;
}

inline Vec concat(Vec a, const Vec& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

inline Vec hadamard(Vec a, const Vec& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] *= b[i];
  return a;
}

inline Real dot(const Vec& a, const Vec& b) {
  Real acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline Real norm(const Vec& x) { return std::sqrt(dot(x, x)); }

inline Vec scaled(Vec x, Real alpha) {
  for (Real& e : x) e *= alpha;
  return x;
}

inline Vec amplitude_scale(const Vec& o, const Vec& v, Real eps) {
  return scaled(o, norm(v) / std::max(norm(o), eps));
}

/// Central-difference gradient of `f` at `x`, evaluated in long double.
inline std::vector<double> fd_gradient(const std::function<Real(const Vec&)>& f, std::span<const double> x,
                                       double step = 1e-5) {
  Vec at = widen(x);
  std::vector<double> g(at.size());
  for (std::size_t i = 0; i < at.size(); ++i) {
    const Real saved = at[i];
    at[i] = saved + step;
    const Real plus = f(at);
    at[i] = saved - step;
    const Real minus = f(at);
    at[i] = saved;
    g[i] = static_cast<double>((plus - minus) / (2 * static_cast<Real>(step)));
  }
  return g;
}

}  // namespace ext

inline double max_rel_error(std::span<const double> analytic, const std::vector<double>& numeric) {
  double worst = 0.0;
  for (std::size_t i = 0; i < numeric.size(); ++i) worst = std::max(worst, fd_rel_error(analytic[i], numeric[i]));
  return worst;
}

/// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const std::filesystem::path dir = std::filesystem::path(GATEFUSE_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace gatefuse::testing
