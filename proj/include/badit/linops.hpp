#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "badit/error.hpp"

namespace badit {

/// Row-major dense matrix of doubles.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static DenseMatrix diagonal(std::span<const double> diag);
  /// Builds a matrix whose j-th column is `columns[j]`.
  static DenseMatrix from_columns(const std::vector<std::vector<double>>& columns);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }
  std::vector<double> col(std::size_t j) const;
  void set_col(std::size_t j, std::span<const double> values);

  DenseMatrix transpose() const;
  /// Copy of columns [first, first + count).
  DenseMatrix col_block(std::size_t first, std::size_t count) const;
  /// Copy of rows [first, first + count).
  DenseMatrix row_block(std::size_t first, std::size_t count) const;

  DenseMatrix& operator+=(const DenseMatrix& other);
  DenseMatrix& operator-=(const DenseMatrix& other);
  DenseMatrix& operator*=(double s) noexcept;

  bool operator==(const DenseMatrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator*(double s, DenseMatrix a);

/// a * b
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
/// aᵀ * b
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
/// a * bᵀ
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);
std::vector<double> matvec(const DenseMatrix& a, std::span<const double> x);
std::vector<double> matvec_t(const DenseMatrix& a, std::span<const double> x);

double dot(std::span<const double> x, std::span<const double> y);
double norm2(std::span<const double> x);

/// Σ_ij x_ij y_ij
double frobenius_inner(const DenseMatrix& x, const DenseMatrix& y);
double frobenius_norm(const DenseMatrix& x);
double max_abs(const DenseMatrix& x);
/// ‖QᵀQ − I‖_max; requires cols ≤ rows.
double orthonormality_defect(const DenseMatrix& q);

bool all_finite(const DenseMatrix& m) noexcept;
void require_finite(const DenseMatrix& m, const char* what);
void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* what);

struct SvdResult {
  DenseMatrix u;              // m×R, orthonormal columns
  std::vector<double> sigma;  // descending, nonnegative
  DenseMatrix v;              // n×R, orthonormal columns

  std::size_t rank() const noexcept { return sigma.size(); }
  /// U diag(σ) Vᵀ
  DenseMatrix reconstruct() const;
};

/// Thin SVD truncated to the `rank` leading singular triplets.
///
/// Computed with one-sided Jacobi rotations, so results are deterministic.
/// Each left singular vector is signed so that its largest-magnitude entry is
/// positive. Columns of U belonging to (numerically) zero singular values are
/// completed to an orthonormal set.
SvdResult truncated_svd(const DenseMatrix& w, std::size_t rank);

/// Full thin SVD, R = min(m, n).
SvdResult thin_svd(const DenseMatrix& w);

}  // namespace badit
