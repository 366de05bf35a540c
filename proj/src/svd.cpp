#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "badit/linops.hpp"

namespace badit {

namespace {

using Column = std::vector<double>;

double col_dot(const Column& x, const Column& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

void rotate(Column& p, Column& q, double c, double s) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double xp = p[i];
    const double xq = q[i];
    p[i] = c * xp - s * xq;
    q[i] = s * xp + c * xq;
  }
}

// Fills `u` (a slot that belongs to a zero singular value) with a unit vector
// orthogonal to every column in `basis`, taken from the standard basis.
void complete_column(Column& u, const std::vector<const Column*>& basis) {
  const std::size_t m = u.size();
  const double accept = 0.5 * static_cast<double>(m - std::min(m, basis.size())) / static_cast<double>(m);
  for (std::size_t e = 0; e < m; ++e) {
    Column cand(m, 0.0);
    cand[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (const Column* b : basis) {
        const double proj = col_dot(cand, *b);
        for (std::size_t i = 0; i < m; ++i) cand[i] -= proj * (*b)[i];
      }
    }
    const double nrm2 = col_dot(cand, cand);
    if (nrm2 >= accept && nrm2 > 0.0) {
      const double inv = 1.0 / std::sqrt(nrm2);
      for (double& x : cand) x *= inv;
      u = std::move(cand);
      return;
    }
  }
  throw Error(ErrorKind::InvalidRank, "cannot complete orthonormal basis");
}

struct TallSvd {
  std::vector<Column> u;  // n columns of length m
  std::vector<double> sigma;
  std::vector<Column> v;  // n columns of length n
};

// One-sided (Hestenes) Jacobi on a tall matrix given as columns, m >= n.
TallSvd jacobi_tall(std::vector<Column> a) {
  const std::size_t n = a.size();
  const std::size_t m = n == 0 ? 0 : a.front().size();
  std::vector<Column> v(n, Column(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) v[j][j] = 1.0;

  const double eps = std::numeric_limits<double>::epsilon();
  const double tol = eps * std::sqrt(static_cast<double>(m));
  constexpr int kMaxSweeps = 80;

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = col_dot(a[p], a[p]);
        const double beta = col_dot(a[q], a[q]);
        if (alpha == 0.0 || beta == 0.0) continue;
        const double gamma = col_dot(a[p], a[q]);
        if (std::abs(gamma) <= tol * std::sqrt(alpha) * std::sqrt(beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate(a[p], a[q], c, s);
        rotate(v[p], v[q], c, s);
      }
    }
    if (!rotated) break;
  }

  std::vector<double> norms(n);
  for (std::size_t j = 0; j < n; ++j) norms[j] = std::sqrt(col_dot(a[j], a[j]));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  TallSvd out;
  out.u.resize(n);
  out.v.resize(n);
  out.sigma.resize(n);
  const double smax = n == 0 ? 0.0 : norms[order.front()];
  const double zero_cut = smax * static_cast<double>(std::max<std::size_t>(m, 1)) * eps;
  std::vector<std::size_t> deficient;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    out.sigma[j] = norms[src];
    out.v[j] = std::move(v[src]);
    if (norms[src] > zero_cut && norms[src] > 0.0) {
      const double inv = 1.0 / norms[src];
      out.u[j] = std::move(a[src]);
      for (double& x : out.u[j]) x *= inv;
    } else {
      out.u[j] = Column(m, 0.0);
      deficient.push_back(j);
    }
  }
  if (!deficient.empty()) {
    std::vector<const Column*> basis;
    for (std::size_t j = 0; j < n; ++j)
      if (std::find(deficient.begin(), deficient.end(), j) == deficient.end()) basis.push_back(&out.u[j]);
    for (std::size_t j : deficient) {
      complete_column(out.u[j], basis);
      basis.push_back(&out.u[j]);
    }
  }
  return out;
}

}  // namespace

SvdResult thin_svd(const DenseMatrix& w) {
  require_finite(w, "svd");
  const std::size_t m = w.rows();
  const std::size_t n = w.cols();
  if (m == 0 || n == 0) throw Error(ErrorKind::InvalidRank, "svd of an empty matrix");

  const bool wide = m < n;
  const std::size_t tall_rows = wide ? n : m;
  const std::size_t tall_cols = wide ? m : n;
  std::vector<Column> cols(tall_cols, Column(tall_rows));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (wide) cols[i][j] = w(i, j);
      else cols[j][i] = w(i, j);
    }

  TallSvd t = jacobi_tall(std::move(cols));
  const std::size_t r = tall_cols;
  SvdResult res;
  res.sigma = std::move(t.sigma);
  // For the wide case W = Tᵀ with T = U' Σ V'ᵀ, so W = V' Σ U'ᵀ.
  const std::vector<Column>& left = wide ? t.v : t.u;
  const std::vector<Column>& right = wide ? t.u : t.v;
  res.u = DenseMatrix(m, r);
  res.v = DenseMatrix(n, r);
  for (std::size_t j = 0; j < r; ++j) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < m; ++i)
      if (std::abs(left[j][i]) > std::abs(left[j][arg])) arg = i;
    const double sign = left[j][arg] < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < m; ++i) res.u(i, j) = sign * left[j][i];
    for (std::size_t i = 0; i < n; ++i) res.v(i, j) = sign * right[j][i];
  }
  return res;
}

SvdResult truncated_svd(const DenseMatrix& w, std::size_t rank) {
  const std::size_t full = std::min(w.rows(), w.cols());
  if (rank < 1 || rank > full)
    throw Error(ErrorKind::InvalidRank, "rank " + std::to_string(rank) + " outside [1, " +
                                            std::to_string(full) + "]");
  SvdResult res = thin_svd(w);
  if (rank == full) return res;
  res.u = res.u.col_block(0, rank);
  res.v = res.v.col_block(0, rank);
  res.sigma.resize(rank);
  return res;
}

}  // namespace badit
