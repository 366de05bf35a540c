#pragma once

#include <vector>

#include "badit/linops.hpp"

namespace badit::harness {

/// Linear model h = W x under the loss ½‖W x − y‖²; rows of X/Y are samples.
/// F(i,j) = mean over samples of (e_i x_j)², e = W x − y.
DenseMatrix fisher_diagonal(const DenseMatrix& w, const DenseMatrix& x, const DenseMatrix& y);

/// Mean of e_i x_j over samples (signed).
DenseMatrix mean_gradient(const DenseMatrix& w, const DenseMatrix& x, const DenseMatrix& y);

/// mask_i = |mean over samples of (W x)_i| > eps
std::vector<bool> activated_neurons(const DenseMatrix& w, const DenseMatrix& x, double eps);

struct OverlapReport {
  std::vector<std::vector<std::size_t>> selected;  // per task, ascending unit ids
  std::vector<std::size_t> unit_counts;            // tasks selecting each unit
  std::vector<std::size_t> histogram;              // units per count 0..T
  std::vector<std::size_t> positive_rows;          // per row: tasks with positive mean gradient
  std::vector<std::size_t> negative_rows;
};

/// Each task keeps the top ceil(keep_fraction · units) parameters by Fisher
/// mass (ties to the lower index). Sign counts use each task's row mean of
/// `mean_grads`, skipped when it is empty.
OverlapReport overlap_report(const std::vector<DenseMatrix>& fishers, double keep_fraction,
                             const std::vector<DenseMatrix>& mean_grads = {});

/// Same counts from precomputed per-task masks; sign fields stay empty.
OverlapReport overlap_report(const std::vector<std::vector<bool>>& masks);

}  // namespace badit::harness
