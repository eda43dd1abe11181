// SPDX-License-Identifier: Apache-2.0

#include "gatefuse/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gatefuse {

namespace {

void require_finite(std::span<const double> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      std::ostringstream msg;
      msg << what << ": non-finite entry at index " << i;
      throw NumericError(msg.str());
    }
  }
}

void require_same_dim(const char* what, const Vector& a, const Vector& b) {
  if (a.dim() != b.dim()) throw_shape_error(what, a.dim(), b.dim());
}

}  // namespace

void throw_shape_error(const std::string& what, std::size_t expected, std::size_t actual) {
  std::ostringstream msg;
  msg << what << ": expected dim " << expected << ", got " << actual;
  throw ShapeError(msg.str());
}

Vector::Vector(std::size_t dim, double fill) : data_(dim, fill) {
  require_finite(data_, "Vector");
}

Vector::Vector(std::vector<double> data) : data_(std::move(data)) {
  require_finite(data_, "Vector");
}

Vector::Vector(std::initializer_list<double> values) : data_(values) {
  require_finite(data_, "Vector");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  require_finite(data_, "Matrix");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) throw_shape_error("Matrix data", rows * cols, data_.size());
  require_finite(data_, "Matrix");
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() == 0 ? 0 : rows.begin()->size()) {
  data_.reserve(rows_ * cols_);
  for (const auto& row : rows) {
    if (row.size() != cols_) throw_shape_error("Matrix row", cols_, row.size());
    data_.insert(data_.end(), row.begin(), row.end());
  }
  require_finite(data_, "Matrix");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Vector affine(const Vector& x, const Matrix& w, const Vector& b) {
  if (w.cols() != x.dim()) throw_shape_error("affine: W columns vs x", w.cols(), x.dim());
  if (w.rows() != b.dim()) throw_shape_error("affine: W rows vs b", w.rows(), b.dim());
  std::vector<double> out(w.rows());
  for (std::size_t i = 0; i < w.rows(); ++i) {
    double acc = b[i];
    for (std::size_t j = 0; j < w.cols(); ++j) acc += w(i, j) * x[j];
    out[i] = acc;
  }
  return Vector(std::move(out));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector sigmoid(const Vector& x) {
  std::vector<double> out(x.dim());
  std::transform(x.begin(), x.end(), out.begin(), [](double t) { return sigmoid(t); });
  return Vector(std::move(out));
}

double l2_norm(const Vector& x) {
  double acc = 0.0;
  for (double t : x) acc += t * t;
  return std::sqrt(acc);
}

Vector concat(const Vector& a, const Vector& b) {
  std::vector<double> out;
  out.reserve(a.dim() + b.dim());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return Vector(std::move(out));
}

std::pair<Vector, Vector> split(const Vector& x, std::size_t head) {
  if (head > x.dim()) throw_shape_error("split: head exceeds dim", x.dim(), head);
  const auto first = x.raw().begin();
  return {Vector(std::vector<double>(first, first + static_cast<std::ptrdiff_t>(head))),
          Vector(std::vector<double>(first + static_cast<std::ptrdiff_t>(head), x.raw().end()))};
}

Vector hadamard(const Vector& a, const Vector& b) {
  require_same_dim("hadamard", a, b);
  std::vector<double> out(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i) out[i] = a[i] * b[i];
  return Vector(std::move(out));
}

Vector amplitude_scale(const Vector& o, const Vector& v, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("amplitude_scale: epsilon must be positive");
  return scaled(o, l2_norm(v) / std::max(l2_norm(o), epsilon));
}

Vector scaled(const Vector& x, double alpha) {
  std::vector<double> out(x.dim());
  for (std::size_t i = 0; i < x.dim(); ++i) out[i] = x[i] * alpha;
  return Vector(std::move(out));
}

Vector add(const Vector& a, const Vector& b) {
  require_same_dim("add", a, b);
  std::vector<double> out(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i) out[i] = a[i] + b[i];
  return Vector(std::move(out));
}

double dot(const Vector& a, const Vector& b) {
  require_same_dim("dot", a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) acc += a[i] * b[i];
  return acc;
}

AffineGrads affine_vjp(const Vector& x, const Matrix& w, const Vector& upstream) {
  if (w.cols() != x.dim()) throw_shape_error("affine_vjp: W columns vs x", w.cols(), x.dim());
  if (w.rows() != upstream.dim())
    throw_shape_error("affine_vjp: W rows vs upstream", w.rows(), upstream.dim());
  std::vector<double> dx(x.dim(), 0.0);
  std::vector<double> dw(w.rows() * w.cols());
  for (std::size_t i = 0; i < w.rows(); ++i) {
    const double g = upstream[i];
    for (std::size_t j = 0; j < w.cols(); ++j) {
      dx[j] += w(i, j) * g;
      dw[i * w.cols() + j] = g * x[j];
    }
  }
  return {Vector(std::move(dx)), Matrix(w.rows(), w.cols(), std::move(dw)), upstream};
}

Vector sigmoid_vjp(const Vector& x, const Vector& upstream) {
  require_same_dim("sigmoid_vjp", x, upstream);
  std::vector<double> out(x.dim());
  for (std::size_t i = 0; i < x.dim(); ++i) {
    const double s = sigmoid(x[i]);
    out[i] = upstream[i] * s * (1.0 - s);
  }
  return Vector(std::move(out));
}

std::pair<Vector, Vector> concat_vjp(std::size_t dim_a, const Vector& upstream) {
  return split(upstream, dim_a);
}

std::pair<Vector, Vector> hadamard_vjp(const Vector& a, const Vector& b, const Vector& upstream) {
  require_same_dim("hadamard_vjp", a, b);
  require_same_dim("hadamard_vjp upstream", a, upstream);
  return {hadamard(upstream, b), hadamard(upstream, a)};
}

Vector l2_norm_vjp(const Vector& x, double upstream) {
  const double norm = l2_norm(x);
  if (norm == 0.0) return Vector(x.dim());
  return scaled(x, upstream / norm);
}

std::pair<Vector, Vector> amplitude_scale_vjp(const Vector& o, const Vector& v, double epsilon,
                                              const Vector& upstream) {
  require_same_dim("amplitude_scale_vjp upstream", o, upstream);
  if (!(epsilon > 0.0)) throw std::invalid_argument("amplitude_scale_vjp: epsilon must be positive");
  const double amp = l2_norm(v);
  const double norm_o = l2_norm(o);
  const double denom = std::max(norm_o, epsilon);
  const double og = dot(o, upstream);

  // s = o * amp / denom
  Vector d_o = scaled(upstream, amp / denom);
  if (norm_o > epsilon) {
    const double coeff = -amp * og / (denom * denom * denom);
    for (std::size_t i = 0; i < o.dim(); ++i) d_o[i] += coeff * o[i];
  }
  Vector d_v = l2_norm_vjp(v, og / denom);
  return {std::move(d_o), std::move(d_v)};
}

OpGrads vjp(OpId op, const OpInputs& in, const Vector& upstream) {
  auto need = [&](std::size_t vectors, std::size_t matrices, std::size_t scalars) {
    if (in.vectors.size() != vectors) throw_shape_error("vjp: vector inputs", vectors, in.vectors.size());
    if (in.matrices.size() != matrices)
      throw_shape_error("vjp: matrix inputs", matrices, in.matrices.size());
    if (in.scalars.size() != scalars) throw_shape_error("vjp: scalar inputs", scalars, in.scalars.size());
  };

  switch (op) {
    case OpId::affine: {
      need(2, 1, 0);
      const auto& w = in.matrices[0];
      if (w.rows() != in.vectors[1].dim())
        throw_shape_error("vjp affine: W rows vs b", w.rows(), in.vectors[1].dim());
      auto g = affine_vjp(in.vectors[0], w, upstream);
      return {{std::move(g.dx), std::move(g.db)}, {std::move(g.dw)}};
    }
    case OpId::sigmoid:
      need(1, 0, 0);
      return {{sigmoid_vjp(in.vectors[0], upstream)}, {}};
    case OpId::concat: {
      need(2, 0, 0);
      const std::size_t total = in.vectors[0].dim() + in.vectors[1].dim();
      if (upstream.dim() != total) throw_shape_error("vjp concat: upstream", total, upstream.dim());
      auto [da, db] = concat_vjp(in.vectors[0].dim(), upstream);
      return {{std::move(da), std::move(db)}, {}};
    }
    case OpId::hadamard: {
      need(2, 0, 0);
      auto [da, db] = hadamard_vjp(in.vectors[0], in.vectors[1], upstream);
      return {{std::move(da), std::move(db)}, {}};
    }
    case OpId::l2_norm:
      need(1, 0, 0);
      if (upstream.dim() != 1) throw_shape_error("vjp l2_norm: upstream", 1, upstream.dim());
      return {{l2_norm_vjp(in.vectors[0], upstream[0])}, {}};
    case OpId::amplitude_scale: {
      need(2, 0, 1);
      auto [d_o, d_v] = amplitude_scale_vjp(in.vectors[0], in.vectors[1], in.scalars[0], upstream);
      return {{std::move(d_o), std::move(d_v)}, {}};
    }
  }
  throw std::invalid_argument("vjp: unknown op id " + std::to_string(static_cast<int>(op)));
}

}  // namespace gatefuse
