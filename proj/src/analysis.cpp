#include "badit/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace badit::harness {

namespace {

void require_data(const DenseMatrix& w, const DenseMatrix& x) {
  if (x.rows() == 0) throw Error(ErrorKind::InvalidInput, "empty task data");
  if (x.cols() != w.cols()) throw Error(ErrorKind::Dimension, "input width differs from model");
}

DenseMatrix residuals(const DenseMatrix& w, const DenseMatrix& x, const DenseMatrix& y) {
  require_data(w, x);
  if (y.rows() != x.rows() || y.cols() != w.rows())
    throw Error(ErrorKind::Dimension, "targets do not match model outputs");
  DenseMatrix e = matmul_nt(x, w);
  e -= y;
  return e;
}

OverlapReport count(std::vector<std::vector<std::size_t>> selected, std::size_t units) {
  OverlapReport rep;
  rep.unit_counts.assign(units, 0);
  for (const auto& s : selected)
    for (std::size_t u : s) ++rep.unit_counts[u];
  rep.histogram.assign(selected.size() + 1, 0);
  for (std::size_t c : rep.unit_counts) ++rep.histogram[c];
  rep.selected = std::move(selected);
  return rep;
}

}  // namespace

DenseMatrix fisher_diagonal(const DenseMatrix& w, const DenseMatrix& x, const DenseMatrix& y) {
  const DenseMatrix e = residuals(w, x, y);
  DenseMatrix f(w.rows(), w.cols());
  for (std::size_t s = 0; s < x.rows(); ++s)
    for (std::size_t i = 0; i < w.rows(); ++i)
      for (std::size_t j = 0; j < w.cols(); ++j) {
        const double g = e(s, i) * x(s, j);
        f(i, j) += g * g;
      }
  f *= 1.0 / static_cast<double>(x.rows());
  return f;
}

DenseMatrix mean_gradient(const DenseMatrix& w, const DenseMatrix& x, const DenseMatrix& y) {
  DenseMatrix g = matmul_tn(residuals(w, x, y), x);
  g *= 1.0 / static_cast<double>(x.rows());
  return g;
}

std::vector<bool> activated_neurons(const DenseMatrix& w, const DenseMatrix& x, double eps) {
  if (!(eps > 0.0)) throw Error(ErrorKind::InvalidParameter, "eps must be positive");
  require_data(w, x);
  const DenseMatrix h = matmul_nt(x, w);
  std::vector<bool> mask(w.rows());
  for (std::size_t i = 0; i < w.rows(); ++i) {
    double mean = 0.0;
    for (std::size_t s = 0; s < h.rows(); ++s) mean += h(s, i);
    mean /= static_cast<double>(h.rows());
    mask[i] = std::abs(mean) > eps;
  }
  return mask;
}

OverlapReport overlap_report(const std::vector<DenseMatrix>& fishers, double keep_fraction,
                             const std::vector<DenseMatrix>& mean_grads) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
    throw Error(ErrorKind::InvalidParameter, "keep_fraction must lie in (0, 1]");
  if (fishers.size() < 2) throw Error(ErrorKind::InvalidInput, "overlap needs at least two tasks");
  const std::size_t units = fishers.front().size();
  for (const auto& f : fishers)
    if (f.rows() != fishers.front().rows() || f.cols() != fishers.front().cols())
      throw Error(ErrorKind::Dimension, "fisher shapes differ across tasks");
  const auto keep = static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(units) - 1e-12));

  std::vector<std::vector<std::size_t>> selected;
  for (const auto& f : fishers) {
    std::vector<std::size_t> idx(units);
    std::iota(idx.begin(), idx.end(), 0);
    const auto vals = f.data();
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });
    idx.resize(std::max<std::size_t>(keep, 1));
    std::sort(idx.begin(), idx.end());
    selected.push_back(std::move(idx));
  }
  OverlapReport rep = count(std::move(selected), units);

  if (!mean_grads.empty()) {
    if (mean_grads.size() != fishers.size())
      throw Error(ErrorKind::Dimension, "one mean gradient per task expected");
    const std::size_t rows = mean_grads.front().rows();
    rep.positive_rows.assign(rows, 0);
    rep.negative_rows.assign(rows, 0);
    for (const auto& g : mean_grads) {
      if (g.rows() != rows) throw Error(ErrorKind::Dimension, "mean gradient shapes differ");
      for (std::size_t i = 0; i < rows; ++i) {
        double s = 0.0;
        for (double v : g.row(i)) s += v;
        if (s > 0.0) ++rep.positive_rows[i];
        if (s < 0.0) ++rep.negative_rows[i];
      }
    }
  }
  return rep;
}

OverlapReport overlap_report(const std::vector<std::vector<bool>>& masks) {
  if (masks.size() < 2) throw Error(ErrorKind::InvalidInput, "overlap needs at least two tasks");
  const std::size_t units = masks.front().size();
  std::vector<std::vector<std::size_t>> selected;
  for (const auto& m : masks) {
    if (m.size() != units) throw Error(ErrorKind::Dimension, "mask lengths differ across tasks");
    std::vector<std::size_t> s;
    for (std::size_t u = 0; u < units; ++u)
      if (m[u]) s.push_back(u);
    selected.push_back(std::move(s));
  }
  return count(std::move(selected), units);
}

}  // namespace badit::harness
