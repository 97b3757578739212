#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace somreplay {

/// Dense vector of doubles.
class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t dim, double fill = 0.0) : data_(dim, fill) {}
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {}
  explicit Vector(std::span<const double> values) : data_(values.begin(), values.end()) {}
  Vector(std::initializer_list<double> values) : data_(values) {}

  std::size_t dim() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }
  operator std::span<const double>() const { return data_; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  const std::vector<double>& values() const { return data_; }

  bool operator==(const Vector&) const = default;

 private:
  std::vector<double> data_;
};

/// General dense matrix, row-major.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Symmetric d x d matrix stored densely (row-major, both triangles).
///
/// Mutating accessors write both (i, j) and (j, i), so symmetry holds after
/// every public operation.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t dim, double fill = 0.0) : dim_(dim), data_(dim * dim, fill) {}

  /// Builds from nested rows; throws ContractError unless square and
  /// symmetric within `tol`. The stored matrix is the exact average
  /// (A + A^T) / 2.
  SymMatrix(std::initializer_list<std::initializer_list<double>> rows, double tol = 1e-9);

  /// Adopts a row-major buffer after the same checks as above.
  static SymMatrix from_dense(std::size_t dim, std::span<const double> row_major, double tol = 1e-9);

  static SymMatrix identity(std::size_t dim, double scale = 1.0);

  std::size_t dim() const { return dim_; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * dim_ + j]; }
  void set(std::size_t i, std::size_t j, double v) {
    data_[i * dim_ + j] = v;
    data_[j * dim_ + i] = v;
  }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  std::span<const double> data() const { return data_; }

  /// Raw access for kernels that maintain symmetry themselves.
  std::span<double> mutable_data() { return data_; }

  double max_abs() const;
  double trace() const;
  bool is_finite() const;

  bool operator==(const SymMatrix&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

struct EigenDecomposition {
  Vector eigenvalues;  // descending
  Matrix eigenvectors;  // column k pairs with eigenvalues[k]
  int sweeps = 0;
};

struct JacobiOptions {
  int max_sweeps = 100;
  /// Convergence when the off-diagonal Frobenius norm drops below
  /// tolerance * ||A||_F.
  double tolerance = 1e-10;
};

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
/// Throws NumericalError (with the final off-diagonal residual) when the
/// sweep cap is reached.
EigenDecomposition eigh(const SymMatrix& a, const JacobiOptions& options = {});

/// Lower-triangular L with L L^T = a. Throws NumericalError naming the
/// first non-positive pivot.
Matrix cholesky(const SymMatrix& a);

/// Q diag(max(lambda, epsilon)) Q^T where Q, lambda come from eigh(cov + epsilon I).
SymMatrix regularize_cov(const SymMatrix& cov, double epsilon = 1e-5);

/// Q diag(values) Q^T, symmetrized exactly.
SymMatrix reconstruct(const Matrix& q, std::span<const double> values);

/// Largest |(Q^T Q - I)_ij|.
double orthogonality_error(const Matrix& q);

}  // namespace somreplay
