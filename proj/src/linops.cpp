#include "badit/linops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "badit/kernels.hpp"

namespace badit {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Dimension: return "dimension error";
    case ErrorKind::InvalidRank: return "invalid rank";
    case ErrorKind::InvalidInput: return "invalid input";
    case ErrorKind::Capacity: return "capacity error";
    case ErrorKind::InvalidParameter: return "invalid parameter";
    case ErrorKind::IndexOutOfRange: return "index out of range";
    case ErrorKind::ConstraintViolation: return "constraint violation";
    case ErrorKind::DegenerateInput: return "degenerate input";
    case ErrorKind::DivisionHazard: return "division hazard";
    case ErrorKind::Mode: return "mode error";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::Format: return "format error";
  }
  return "error";
}

namespace {

std::string shape_str(const DenseMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw Error(ErrorKind::Dimension, "data length " + std::to_string(data_.size()) +
                                          " does not match " + std::to_string(rows_) + "x" +
                                          std::to_string(cols_));
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw Error(ErrorKind::Dimension, "ragged row list");
    data.insert(data.end(), row.begin(), row.end());
  }
  return DenseMatrix(r, c, std::move(data));
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> diag) {
  DenseMatrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

DenseMatrix DenseMatrix::from_columns(const std::vector<std::vector<double>>& columns) {
  const std::size_t c = columns.size();
  const std::size_t r = c == 0 ? 0 : columns.front().size();
  DenseMatrix m(r, c);
  for (std::size_t j = 0; j < c; ++j) m.set_col(j, columns[j]);
  return m;
}

std::vector<double> DenseMatrix::col(std::size_t j) const {
  std::vector<double> out(rows_);
  for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
  return out;
}

void DenseMatrix::set_col(std::size_t j, std::span<const double> values) {
  if (values.size() != rows_) throw Error(ErrorKind::Dimension, "column length mismatch");
  for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = values[i];
}

DenseMatrix DenseMatrix::transpose() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

DenseMatrix DenseMatrix::col_block(std::size_t first, std::size_t count) const {
  if (first + count > cols_) throw Error(ErrorKind::Dimension, "column block out of range");
  DenseMatrix out(rows_, count);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = (*this)(i, first + j);
  return out;
}

DenseMatrix DenseMatrix::row_block(std::size_t first, std::size_t count) const {
  if (first + count > rows_) throw Error(ErrorKind::Dimension, "row block out of range");
  std::vector<double> data(data_.begin() + static_cast<std::ptrdiff_t>(first * cols_),
                           data_.begin() + static_cast<std::ptrdiff_t>((first + count) * cols_));
  return DenseMatrix(count, cols_, std::move(data));
}

DenseMatrix& DenseMatrix::operator+=(const DenseMatrix& other) {
  require_same_shape(*this, other, "matrix addition");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

DenseMatrix& DenseMatrix::operator-=(const DenseMatrix& other) {
  require_same_shape(*this, other, "matrix subtraction");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

DenseMatrix& DenseMatrix::operator*=(double s) noexcept {
  for (double& x : data_) x *= s;
  return *this;
}

DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) { return a += b; }
DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b) { return a -= b; }
DenseMatrix operator*(double s, DenseMatrix a) { return a *= s; }

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows())
    throw Error(ErrorKind::Dimension, "matmul " + shape_str(a) + " * " + shape_str(b));
  DenseMatrix c(a.rows(), b.cols());
  kernels::parallel::gemm(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
  return c;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows())
    throw Error(ErrorKind::Dimension, "matmul_tn " + shape_str(a) + "ᵀ * " + shape_str(b));
  DenseMatrix c(a.cols(), b.cols());
  kernels::parallel::gemm_tn(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
  return c;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols())
    throw Error(ErrorKind::Dimension, "matmul_nt " + shape_str(a) + " * " + shape_str(b) + "ᵀ");
  DenseMatrix c(a.rows(), b.rows());
  kernels::parallel::gemm_nt(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.rows());
  return c;
}

std::vector<double> matvec(const DenseMatrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw Error(ErrorKind::Dimension, "matvec: length mismatch");
  std::vector<double> y(a.rows());
  kernels::parallel::gemm(a.data(), x, y, a.rows(), a.cols(), 1);
  return y;
}

std::vector<double> matvec_t(const DenseMatrix& a, std::span<const double> x) {
  if (a.rows() != x.size()) throw Error(ErrorKind::Dimension, "matvec_t: length mismatch");
  std::vector<double> y(a.cols());
  kernels::parallel::gemm_tn(a.data(), x, y, a.rows(), a.cols(), 1);
  return y;
}

double dot(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::Dimension, "dot: length mismatch");
  return kernels::parallel::dot(x, y);
}

double norm2(std::span<const double> x) { return std::sqrt(kernels::parallel::dot(x, x)); }

double frobenius_inner(const DenseMatrix& x, const DenseMatrix& y) {
  require_same_shape(x, y, "frobenius_inner");
  return kernels::parallel::dot(x.data(), y.data());
}

double frobenius_norm(const DenseMatrix& x) { return norm2(x.data()); }

double max_abs(const DenseMatrix& x) {
  double m = 0.0;
  for (double v : x.data()) m = std::max(m, std::abs(v));
  return m;
}

double orthonormality_defect(const DenseMatrix& q) {
  if (q.cols() > q.rows())
    throw Error(ErrorKind::Dimension, "orthonormality_defect needs cols <= rows, got " +
                                          shape_str(q));
  DenseMatrix g = matmul_tn(q, q);
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
  return max_abs(g);
}

bool all_finite(const DenseMatrix& m) noexcept {
  return std::all_of(m.data().begin(), m.data().end(), [](double v) { return std::isfinite(v); });
}

void require_finite(const DenseMatrix& m, const char* what) {
  if (!all_finite(m)) throw Error(ErrorKind::InvalidInput, std::string(what) + ": non-finite entry");
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(ErrorKind::Dimension,
                std::string(what) + ": shape " + shape_str(a) + " vs " + shape_str(b));
}

DenseMatrix SvdResult::reconstruct() const {
  DenseMatrix us = u;
  for (std::size_t i = 0; i < us.rows(); ++i)
    for (std::size_t j = 0; j < us.cols(); ++j) us(i, j) *= sigma[j];
  return matmul_nt(us, v);
}

}  // namespace badit
