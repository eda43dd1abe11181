// SPDX-License-Identifier: Apache-2.0
//
// Dense 64-bit vectors and matrices with the handful of ops the fusion
// layers need, each paired with its vector-Jacobian product.

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gatefuse {

/// Raised when operand shapes disagree. The message names expected vs actual.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a value would become NaN or infinite.
class NumericError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

[[noreturn]] void throw_shape_error(const std::string& what, std::size_t expected,
                                    std::size_t actual);

/// Dense real vector. Entries are always finite.
class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t dim, double fill = 0.0);
  explicit Vector(std::vector<double> data);
  Vector(std::initializer_list<double> values);

  std::size_t dim() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  std::span<const double> values() const { return data_; }
  std::span<double> values() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  friend bool operator==(const Vector&, const Vector&) = default;

 private:
  std::vector<double> data_;
};

/// Dense row-major matrix. Entries are always finite.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

  std::span<const double> values() const { return data_; }
  std::span<double> values() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Forward ops

/// W x + b.
Vector affine(const Vector& x, const Matrix& w, const Vector& b);

/// Logistic function, evaluated in the overflow-free two-branch form.
double sigmoid(double x);
Vector sigmoid(const Vector& x);

double l2_norm(const Vector& x);

Vector concat(const Vector& a, const Vector& b);

/// Inverse of concat: the first `head` entries and the rest.
std::pair<Vector, Vector> split(const Vector& x, std::size_t head);

Vector hadamard(const Vector& a, const Vector& b);

/// o / max(|o|, eps) * |v|: rescales o to the l2 amplitude of v.
Vector amplitude_scale(const Vector& o, const Vector& v, double epsilon);

Vector scaled(const Vector& x, double alpha);
Vector add(const Vector& a, const Vector& b);
double dot(const Vector& a, const Vector& b);

// ---------------------------------------------------------------------------
// Vector-Jacobian products. Each takes the forward inputs and the gradient
// of some scalar with respect to the forward output.

struct AffineGrads {
  Vector dx;
  Matrix dw;
  Vector db;
};
AffineGrads affine_vjp(const Vector& x, const Matrix& w, const Vector& upstream);

/// Uses the forward input; sigma'(x) = sigma(x)(1 - sigma(x)).
Vector sigmoid_vjp(const Vector& x, const Vector& upstream);

/// Splits the upstream gradient back onto the two concatenated inputs.
std::pair<Vector, Vector> concat_vjp(std::size_t dim_a, const Vector& upstream);

std::pair<Vector, Vector> hadamard_vjp(const Vector& a, const Vector& b,
                                       const Vector& upstream);

/// Gradient of the scalar l2_norm(x) scaled by `upstream`. Zero at x = 0.
Vector l2_norm_vjp(const Vector& x, double upstream);

/// Returns {do, dv}. Below the epsilon floor the map is linear in o.
std::pair<Vector, Vector> amplitude_scale_vjp(const Vector& o, const Vector& v, double epsilon,
                                              const Vector& upstream);

/// Identifier for the dispatching vjp entry point.
enum class OpId { affine, sigmoid, concat, hadamard, l2_norm, amplitude_scale };

/// Inputs to `vjp`. Unused members stay empty.
struct OpInputs {
  std::vector<Vector> vectors;
  std::vector<Matrix> matrices;
  std::vector<double> scalars;
};

/// Gradients returned by `vjp`, in the same order as the differentiable inputs.
struct OpGrads {
  std::vector<Vector> vectors;
  std::vector<Matrix> matrices;
};

/// Runtime-dispatched vector-Jacobian product over the fixed op set.
///
/// Input layouts:
///   affine:          vectors {x, b}, matrices {W}           -> vectors {dx, db}, matrices {dW}
///   sigmoid:         vectors {x}                            -> vectors {dx}
///   concat:          vectors {a, b}                         -> vectors {da, db}
///   hadamard:        vectors {a, b}                         -> vectors {da, db}
///   l2_norm:         vectors {x}, upstream is 1-dim         -> vectors {dx}
///   amplitude_scale: vectors {o, v}, scalars {epsilon}      -> vectors {do, dv}
///     (the op o / max(|o|, eps) * |v|)
///
/// Throws std::invalid_argument for an unknown id, ShapeError on layout or
/// shape mismatch.
OpGrads vjp(OpId op, const OpInputs& inputs, const Vector& upstream);

}  // namespace gatefuse
