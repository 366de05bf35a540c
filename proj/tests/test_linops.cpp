#include <doctest.h>

#include <cmath>

#include "badit/linops.hpp"
#include "badit/random.hpp"
#include "oracles.hpp"

using namespace badit;

TEST_CASE("truncated_svd of the identity") {
  const SvdResult s = truncated_svd(DenseMatrix::identity(3), 2);
  REQUIRE(s.rank() == 2);
  CHECK(s.sigma[0] == doctest::Approx(1.0));
  CHECK(s.sigma[1] == doctest::Approx(1.0));
}

TEST_CASE("truncated_svd of a diagonal matrix") {
  const std::vector<double> d{3.0, 2.0, 1.0};
  const DenseMatrix w = DenseMatrix::diagonal(d);
  const SvdResult s = truncated_svd(w, 2);
  CHECK(s.sigma[0] == doctest::Approx(3.0));
  CHECK(s.sigma[1] == doctest::Approx(2.0));
  const DenseMatrix res = w - s.reconstruct();
  CHECK(frobenius_inner(res, res) == doctest::Approx(1.0));
}

TEST_CASE("truncation residual matches the eigen-solver tail") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const DenseMatrix w = gaussian_matrix(8, 6, rng);
    const SvdResult s = truncated_svd(w, 4);
    const auto full = oracle::singular_values(w);
    const DenseMatrix res = w - s.reconstruct();
    const double tail = full[4] * full[4] + full[5] * full[5];
    CHECK(std::abs(frobenius_inner(res, res) - tail) <= 1e-10);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(s.sigma[i] - full[i]) <= 1e-10);
  }
}

TEST_CASE("svd factors are orthonormal and sorted, including wide and rank-deficient inputs") {
  Rng rng(3);
  std::vector<DenseMatrix> inputs{gaussian_matrix(30, 12, rng), gaussian_matrix(9, 25, rng)};
  DenseMatrix low = matmul(gaussian_matrix(20, 3, rng), gaussian_matrix(3, 15, rng));
  inputs.push_back(low);
  inputs.emplace_back(7, 5, 0.0);
  for (const auto& w : inputs) {
    const SvdResult s = thin_svd(w);
    CHECK(orthonormality_defect(s.u) <= 1e-10);
    CHECK(orthonormality_defect(s.v) <= 1e-10);
    for (std::size_t i = 1; i < s.rank(); ++i) CHECK(s.sigma[i - 1] >= s.sigma[i]);
    for (double v : s.sigma) CHECK(v >= 0.0);
    CHECK(frobenius_norm(s.reconstruct() - w) <= 1e-10 * std::max(1.0, frobenius_norm(w)));
  }
}

TEST_CASE("svd sign convention: largest-magnitude entry of each left vector is positive") {
  Rng rng(8);
  const SvdResult s = thin_svd(gaussian_matrix(10, 6, rng));
  for (std::size_t j = 0; j < s.rank(); ++j) {
    const auto c = s.u.col(j);
    const auto it = std::max_element(c.begin(), c.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
    CHECK(*it > 0.0);
  }
}

TEST_CASE("svd reconstruction on a larger matrix") {
  Rng rng(21);
  const DenseMatrix w = gaussian_matrix(160, 120, rng);
  const SvdResult s = thin_svd(w);
  CHECK(frobenius_norm(s.reconstruct() - w) / frobenius_norm(w) <= 1e-8);
}

TEST_CASE("truncated_svd rejects bad ranks and non-finite input") {
  CHECK_THROWS_AS(truncated_svd(DenseMatrix::identity(3), 4), Error);
  CHECK_THROWS_AS(truncated_svd(DenseMatrix::identity(3), 0), Error);
  DenseMatrix bad = DenseMatrix::identity(3);
  bad(1, 1) = std::nan("");
  try {
    truncated_svd(bad, 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidInput);
  }
  try {
    truncated_svd(DenseMatrix::identity(3), 5);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidRank);
  }
}

TEST_CASE("frobenius_inner") {
  CHECK(frobenius_inner(DenseMatrix::identity(4), DenseMatrix::identity(4)) == 4.0);
  const DenseMatrix u1 = DenseMatrix::from_columns({{1, 0, 0}});
  const DenseMatrix u2 = DenseMatrix::from_columns({{0, 1, 0}});
  const DenseMatrix v = DenseMatrix::from_rows({{0.6, 0.8}});
  CHECK(frobenius_inner(matmul(u1, v), matmul(u2, v)) == 0.0);
  Rng rng(4);
  const DenseMatrix x = gaussian_matrix(5, 3, rng), y = gaussian_matrix(5, 3, rng);
  double s = 0.0;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 3; ++j) s += x(i, j) * y(i, j);
  CHECK(std::abs(frobenius_inner(x, y) - s) <= 1e-12);
  CHECK(frobenius_inner(x, y) == frobenius_inner(y, x));
  CHECK(frobenius_inner(x, x) > 0.0);
  CHECK(frobenius_inner(DenseMatrix(2, 2), DenseMatrix(2, 2)) == 0.0);
  CHECK_THROWS_AS(frobenius_inner(x, DenseMatrix(3, 5)), Error);
}

TEST_CASE("orthonormality_defect") {
  CHECK(orthonormality_defect(DenseMatrix::identity(3)) == 0.0);
  DenseMatrix two = DenseMatrix::identity(2);
  two *= 2.0;
  CHECK(orthonormality_defect(two) == 3.0);
  Rng rng(2);
  // Gram-Schmidt oracle: classical projection of gaussian columns.
  DenseMatrix g = gaussian_matrix(9, 4, rng);
  for (std::size_t j = 0; j < 4; ++j) {
    auto c = g.col(j);
    for (std::size_t p = 0; p < j; ++p) {
      const auto q = g.col(p);
      double d = 0.0;
      for (std::size_t i = 0; i < 9; ++i) d += c[i] * q[i];
      for (std::size_t i = 0; i < 9; ++i) c[i] -= d * q[i];
    }
    double n = 0.0;
    for (double v : c) n += v * v;
    for (double& v : c) v /= std::sqrt(n);
    g.set_col(j, c);
  }
  CHECK(orthonormality_defect(g) <= 1e-10);
  CHECK_THROWS_AS(orthonormality_defect(DenseMatrix(2, 3)), Error);
}

TEST_CASE("matrix products agree with a naive triple loop") {
  Rng rng(6);
  const DenseMatrix a = gaussian_matrix(7, 5, rng), b = gaussian_matrix(5, 4, rng);
  const DenseMatrix ref = oracle::naive_matmul(a, b);
  CHECK(max_abs(matmul(a, b) - ref) <= 1e-12);
  CHECK(max_abs(matmul_tn(a.transpose(), b) - ref) <= 1e-12);
  CHECK(max_abs(matmul_nt(a, b.transpose()) - ref) <= 1e-12);
  const std::vector<double> x{1.0, -2.0, 0.5, 3.0, 0.0};
  const auto y = matvec(a, x);
  for (std::size_t i = 0; i < 7; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 5; ++j) s += a(i, j) * x[j];
    CHECK(std::abs(y[i] - s) <= 1e-12);
  }
  CHECK_THROWS_AS(matmul(a, a), Error);
}

TEST_CASE("DenseMatrix rejects inconsistent data") {
  CHECK_THROWS_AS(DenseMatrix(2, 2, std::vector<double>{1, 2, 3}), Error);
  CHECK_FALSE(all_finite(DenseMatrix(1, 1, INFINITY)));
}
