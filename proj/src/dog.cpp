#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "badit/dog.hpp"

namespace badit::dog {

namespace {

double row_dot_col(std::span<const double> g, const DenseMatrix& c, std::size_t k) {
  double s = 0.0;
  for (std::size_t d = 0; d < g.size(); ++d) s += g[d] * c(d, k);
  return s;
}

}  // namespace

ClusterLabels spherical_kmeans_init(const GradientBatch& batch, std::size_t k, std::uint64_t seed,
                                    int max_rounds) {
  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < batch.size(); ++i)
    if (!batch.dead_mask[i]) live.push_back(i);
  if (k == 0 || live.size() < k)
    throw Error(ErrorKind::DegenerateInput, std::to_string(live.size()) +
                                                " live components cannot seed " + std::to_string(k) +
                                                " clusters");
  const std::size_t d = batch.dim();
  std::mt19937_64 rng(seed);

  // k-means++ seeding with the chordal distance ‖x − c‖² = 2 − 2cos.
  ClusterLabels out;
  out.centroids = DenseMatrix(d, k);
  std::vector<std::size_t> chosen;
  {
    std::uniform_int_distribution<std::size_t> pick(0, live.size() - 1);
    chosen.push_back(live[pick(rng)]);
  }
  std::vector<double> nearest(live.size(), 4.0);
  while (chosen.size() < k) {
    const auto last = batch.vectors.row(chosen.back());
    double total = 0.0;
    for (std::size_t a = 0; a < live.size(); ++a) {
      const double dist = std::max(0.0, 2.0 - 2.0 * dot(batch.vectors.row(live[a]), last));
      nearest[a] = std::min(nearest[a], dist);
      total += nearest[a];
    }
    std::size_t next = live.size();
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      for (std::size_t a = 0; a < live.size(); ++a) {
        if (nearest[a] <= 0.0) continue;
        next = a;
        target -= nearest[a];
        if (target <= 0.0) break;
      }
    } else {
      for (std::size_t a = 0; a < live.size() && next == live.size(); ++a)
        if (std::find(chosen.begin(), chosen.end(), live[a]) == chosen.end()) next = a;
    }
    chosen.push_back(live[next]);
  }
  for (std::size_t c = 0; c < k; ++c) out.centroids.set_col(c, batch.vectors.row(chosen[c]));

  out.label.assign(batch.size(), std::nullopt);
  std::vector<std::size_t> label(live.size(), 0);
  std::vector<std::size_t> previous;
  for (int round = 0; round < max_rounds; ++round) {
    out.rounds = round + 1;
    std::vector<double> best_sim(live.size());
    for (std::size_t a = 0; a < live.size(); ++a) {
      const auto g = batch.vectors.row(live[a]);
      std::size_t best = 0;
      double bs = row_dot_col(g, out.centroids, 0);
      for (std::size_t c = 1; c < k; ++c) {
        const double s = row_dot_col(g, out.centroids, c);
        if (s > bs) {
          bs = s;
          best = c;
        }
      }
      label[a] = best;
      best_sim[a] = bs;
    }

    DenseMatrix next(d, k);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t a = 0; a < live.size(); ++a) {
      const auto g = batch.vectors.row(live[a]);
      for (std::size_t j = 0; j < d; ++j) next(j, label[a]) += g[j];
      ++count[label[a]];
    }
    std::vector<bool> reseeded(live.size(), false);
    for (std::size_t c = 0; c < k; ++c) {
      auto col = next.col(c);
      const double nrm = norm2(col);
      if (count[c] > 0 && nrm > 0.0) {
        for (double& x : col) x /= nrm;
        next.set_col(c, col);
        continue;
      }
      // Empty (or cancelled) cluster: take the point farthest from its centroid.
      std::size_t far = live.size();
      for (std::size_t a = 0; a < live.size(); ++a) {
        if (reseeded[a]) continue;
        if (far == live.size() || best_sim[a] < best_sim[far]) far = a;
      }
      reseeded[far] = true;
      label[far] = c;
      next.set_col(c, batch.vectors.row(live[far]));
    }
    out.centroids = std::move(next);
    if (label == previous) break;
    previous = label;
  }
  for (std::size_t a = 0; a < live.size(); ++a) out.label[live[a]] = label[a];
  return out;
}

DogResult dog_run(const GradientBatch& batch, std::size_t k, std::size_t r, const DogOptions& opts,
                  const std::optional<GroupingPolicy>& start) {
  if (k == 0 || r == 0 || r * k != batch.size())
    throw Error(ErrorKind::ConstraintViolation, "dog_run needs r*K = " + std::to_string(r * k) +
                                                    " components, got " + std::to_string(batch.size()));
  std::optional<GroupingPolicy> current;
  DogResult res{GroupingPolicy::identity(k, r), 0, {}, {}, false, {}};
  if (start) {
    if (start->k() != k || start->r() != r)
      throw Error(ErrorKind::ConstraintViolation, "start policy shape differs from (K, r)");
    current = *start;
  } else if (batch.live_count() >= k) {
    const ClusterLabels init = spherical_kmeans_init(batch, k, opts.seed);
    current = assign_step(batch, init.centroids, r, opts.mode);
  } else {
    res.warnings.push_back("only " + std::to_string(batch.live_count()) +
                           " live components for " + std::to_string(k) +
                           " experts; spherical K-means skipped");
    current = GroupingPolicy::identity(k, r);
  }
  res.objective_trace.push_back(grouping_objective(*current, batch));

  for (std::size_t it = 1; it <= opts.max_iter; ++it) {
    res.q = orthogonalize_centroids(centroids(*current, batch));
    GroupingPolicy updated = assign_step(batch, res.q, r, opts.mode);
    res.iterations = it;
    res.objective_trace.push_back(grouping_objective(updated, batch));
    const bool same = updated == *current;
    current = std::move(updated);
    if (same) {
      res.converged = true;
      break;
    }
  }
  res.policy = std::move(*current);
  return res;
}

ExpertBank regroup(const ExpertBank& bank, const GroupingPolicy& pi, RegroupOptions opts) {
  const std::size_t k = bank.k();
  const std::size_t r = bank.r();
  if (pi.k() != k || pi.r() != r)
    throw Error(ErrorKind::ConstraintViolation, "grouping shape differs from the bank");
  const auto& alpha = bank.routing();
  constexpr double kHazard = 1e-12;

  std::vector<LoraExpert> experts;
  experts.reserve(k);
  for (std::size_t v = 0; v < k; ++v) {
    LoraExpert dst{DenseMatrix(bank.rows(), r), DenseMatrix(r, bank.cols())};
    const auto members = pi.members(v);
    for (std::size_t slot = 0; slot < r; ++slot) {
      const std::size_t comp = members[slot];
      const std::size_t u = comp / r;
      const std::size_t j = comp % r;
      const LoraExpert& src = bank.expert(u);
      double gamma = 1.0;
      if (opts.rescale && u != v) {
        if (std::abs(alpha[v]) < kHazard)
          throw Error(ErrorKind::DivisionHazard, "routing weight of destination expert " +
                                                     std::to_string(v) + " is ~0; regroup refused");
        gamma = alpha[u] / alpha[v];
      }
      for (std::size_t i = 0; i < bank.rows(); ++i)
        dst.a(i, slot) = gamma == 1.0 ? src.a(i, j) : gamma * src.a(i, j);
      auto brow = src.b.row(j);
      std::copy(brow.begin(), brow.end(), dst.b.row(slot).begin());
    }
    experts.push_back(std::move(dst));
  }
  return ExpertBank(bank.residual(), std::move(experts), alpha, bank.scale());
}

}  // namespace badit::dog
