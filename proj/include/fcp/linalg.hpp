#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fcp/errors.hpp"

namespace fcp {

// Dense storage is row-major so that row i of a composition matrix is the
// composition vector of neuron i.
template <typename Scalar>
using Matrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Index = Eigen::Index;
using MatrixXr = Matrix<double>;
using VectorXr = Vector<double>;

inline std::string shape_string(Index rows, Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

template <typename Derived>
std::string shape_string(const Eigen::EigenBase<Derived>& m) {
  return shape_string(m.rows(), m.cols());
}

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& m, std::string_view what) {
  if (!m.allFinite()) {
    throw NumericError(std::string(what) + ": non-finite value");
  }
}

/// Builds a matrix from row-major data. Rejects empty shapes, a data length
/// that does not match, and non-finite entries.
template <typename Scalar>
Matrix<Scalar> make_matrix(Index rows, Index cols,
                           std::span<const Scalar> row_major) {
  if (rows < 1 || cols < 1) {
    throw ShapeError("make_matrix: empty shape " + shape_string(rows, cols));
  }
  if (static_cast<Index>(row_major.size()) != rows * cols) {
    throw ShapeError("make_matrix: " + std::to_string(row_major.size()) +
                     " values for shape " + shape_string(rows, cols));
  }
  Matrix<Scalar> m =
      Eigen::Map<const Matrix<Scalar>>(row_major.data(), rows, cols);
  require_finite(m, "make_matrix");
  return m;
}

template <typename Scalar = double>
Matrix<Scalar> make_matrix(
    std::initializer_list<std::initializer_list<Scalar>> rows) {
  const auto n_rows = static_cast<Index>(rows.size());
  const auto n_cols =
      n_rows == 0 ? Index{0} : static_cast<Index>(rows.begin()->size());
  if (n_rows < 1 || n_cols < 1) {
    throw ShapeError("make_matrix: empty shape");
  }
  Matrix<Scalar> m(n_rows, n_cols);
  Index i = 0;
  for (const auto& row : rows) {
    if (static_cast<Index>(row.size()) != n_cols) {
      throw ShapeError("make_matrix: ragged row " + std::to_string(i));
    }
    Index j = 0;
    for (Scalar v : row) m(i, j++) = v;
    ++i;
  }
  require_finite(m, "make_matrix");
  return m;
}

template <typename Scalar>
Vector<Scalar> make_vector(std::span<const Scalar> values) {
  if (values.empty()) throw ShapeError("make_vector: empty vector");
  Vector<Scalar> v = Eigen::Map<const Vector<Scalar>>(
      values.data(), static_cast<Index>(values.size()));
  require_finite(v, "make_vector");
  return v;
}

template <typename Scalar = double>
Vector<Scalar> make_vector(std::initializer_list<Scalar> values) {
  return make_vector(std::span<const Scalar>(values.begin(), values.size()));
}

/// Standard matrix product. Each entry accumulates its terms in index
/// order, so an entry's value does not depend on where it sits in the
/// result.
template <typename DerivedA, typename DerivedB>
Matrix<typename DerivedA::Scalar> matmul(const Eigen::MatrixBase<DerivedA>& a,
                                         const Eigen::MatrixBase<DerivedB>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: cannot multiply " + shape_string(a) + " by " +
                     shape_string(b));
  }
  using Scalar = typename DerivedA::Scalar;
  Matrix<Scalar> out(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < b.cols(); ++j) {
      Scalar acc(0);
      for (Index k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  }
  return out;
}

/// Sum of the coefficients taken in ascending order, so the result is the
/// same for every permutation of the input.
template <typename Derived>
typename Derived::Scalar canonical_sum(const Eigen::DenseBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  std::vector<Scalar> terms;
  terms.reserve(static_cast<std::size_t>(v.size()));
  for (Index i = 0; i < v.rows(); ++i)
    for (Index j = 0; j < v.cols(); ++j) terms.push_back(v(i, j));
  std::sort(terms.begin(), terms.end());
  Scalar acc(0);
  for (Scalar t : terms) acc += t;
  return acc;
}

template <typename Derived>
Matrix<typename Derived::Scalar> transpose(const Eigen::MatrixBase<Derived>& a) {
  return a.transpose();
}

/// Scales row i of `m` by `v[i]`; the column-vector/matrix element-wise
/// product used by composition propagation. Result has the shape of `m`.
template <typename DerivedV, typename DerivedM>
Matrix<typename DerivedM::Scalar> col_expand_mul(
    const Eigen::MatrixBase<DerivedV>& v, const Eigen::MatrixBase<DerivedM>& m) {
  if (v.size() != m.rows()) {
    throw ShapeError("col_expand_mul: vector of length " +
                     std::to_string(v.size()) + " against matrix " +
                     shape_string(m));
  }
  Matrix<typename DerivedM::Scalar> out = m;
  for (Index i = 0; i < out.rows(); ++i) out.row(i) *= v(i);
  return out;
}

}  // namespace fcp
