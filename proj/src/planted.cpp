#include "badit/planted.hpp"

#include <algorithm>
#include <numeric>

#include "badit/random.hpp"

namespace badit {

PlantedBundles planted_bundles(std::size_t k, std::size_t r, std::size_t d, double noise,
                               std::uint64_t seed, bool shuffle) {
  if (k == 0 || r == 0 || d < k) throw Error(ErrorKind::Dimension, "planted bundles need d >= K >= 1");
  if (noise < 0.0) throw Error(ErrorKind::InvalidParameter, "noise must be nonnegative");
  Rng rng(seed);
  PlantedBundles out;
  out.directions = random_orthonormal(d, k, rng);
  std::vector<std::size_t> perm(r * k);
  std::iota(perm.begin(), perm.end(), 0);
  if (shuffle) std::shuffle(perm.begin(), perm.end(), rng);
  out.raw = DenseMatrix(r * k, d);
  out.labels.assign(r * k, 0);
  std::normal_distribution<double> nd(0.0, noise > 0.0 ? noise : 1.0);
  std::uniform_real_distribution<double> mag(0.5, 2.0);
  for (std::size_t src = 0; src < r * k; ++src) {
    const std::size_t row = perm[src];
    const std::size_t bundle = src / r;
    out.labels[row] = bundle;
    const double scale = mag(rng);
    for (std::size_t j = 0; j < d; ++j) {
      const double eps = noise > 0.0 ? nd(rng) : 0.0;
      out.raw(row, j) = scale * (out.directions(j, bundle) + eps);
    }
  }
  return out;
}

AdversarialCase greedy_adversarial() {
  // Greedy takes (g1, q1) = 1 first and must then send g2 to q2 (−0.6).
  return {DenseMatrix::from_rows({{1.0, 0.0}, {0.8, -0.6}}), DenseMatrix::identity(2)};
}

}  // namespace badit
