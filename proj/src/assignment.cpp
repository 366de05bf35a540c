#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "badit/dog.hpp"

namespace badit::dog {

namespace {

// Min-cost assignment of every row to a distinct column (rows <= cols), via
// the shortest augmenting path form of the Hungarian method. O(rows² · cols).
std::vector<std::size_t> hungarian_min(const DenseMatrix& cost) {
  const std::size_t n = cost.rows();
  const std::size_t m = cost.cols();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> col_of(n, 0);
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j] != 0) col_of[p[j] - 1] = j - 1;
  return col_of;
}

}  // namespace

GroupingPolicy assign_step(const GradientBatch& batch, const DenseMatrix& q, std::size_t r,
                           AssignMode mode) {
  const std::size_t k = q.cols();
  if (r == 0 || k == 0 || r * k != batch.size())
    throw Error(ErrorKind::ConstraintViolation,
                "capacity r*K = " + std::to_string(r * k) + " does not match " +
                    std::to_string(batch.size()) + " components");
  if (q.rows() != batch.dim())
    throw Error(ErrorKind::Dimension, "direction dimension differs from gradient dimension");

  const DenseMatrix sim = matmul(batch.vectors, q);
  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < batch.size(); ++i)
    if (!batch.dead_mask[i]) live.push_back(i);

  constexpr std::size_t kUnset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> expert_of(batch.size(), kUnset);
  std::vector<std::size_t> load(k, 0);

  if (mode == AssignMode::Exact) {
    if (!live.empty()) {
      // Each expert is expanded into r identical slots.
      DenseMatrix cost(live.size(), r * k);
      for (std::size_t a = 0; a < live.size(); ++a)
        for (std::size_t s = 0; s < r * k; ++s) cost(a, s) = -sim(live[a], s / r);
      const auto slot = hungarian_min(cost);
      for (std::size_t a = 0; a < live.size(); ++a) {
        expert_of[live[a]] = slot[a] / r;
        ++load[slot[a] / r];
      }
    }
  } else {
    struct Pair {
      std::size_t i, k;
      double s;
    };
    std::vector<Pair> pairs;
    pairs.reserve(live.size() * k);
    for (std::size_t i : live)
      for (std::size_t e = 0; e < k; ++e) pairs.push_back({i, e, sim(i, e)});
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) { return x.s > y.s; });
    for (const Pair& p : pairs) {
      if (expert_of[p.i] != kUnset || load[p.k] >= r) continue;
      expert_of[p.i] = p.k;
      ++load[p.k];
    }
  }

  std::size_t next = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (expert_of[i] != kUnset) continue;
    while (load[next] >= r) ++next;
    expert_of[i] = next;
    ++load[next];
  }
  return GroupingPolicy(std::move(expert_of), k, r);
}

double assignment_score(const GroupingPolicy& pi, const GradientBatch& batch, const DenseMatrix& q) {
  if (pi.components() != batch.size() || q.cols() != pi.k() || q.rows() != batch.dim())
    throw Error(ErrorKind::Dimension, "assignment_score: shapes disagree");
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const std::size_t e = pi.expert_of(i);
    auto g = batch.vectors.row(i);
    for (std::size_t d = 0; d < g.size(); ++d) total += g[d] * q(d, e);
  }
  return total;
}

}  // namespace badit::dog
