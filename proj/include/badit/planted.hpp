#pragma once

#include <cstdint>
#include <vector>

#include "badit/linops.hpp"

namespace badit {

/// K bundles of r gradients around mutually orthogonal unit directions.
struct PlantedBundles {
  DenseMatrix raw;                  // rK × d, one gradient per row
  std::vector<std::size_t> labels;  // planted bundle of each row
  DenseMatrix directions;           // d × K, orthonormal
};

/// Row i belongs to bundle labels[i]; rows are shuffled unless `shuffle` is
/// false, in which case row i sits in bundle i / r. Each row is
/// direction + N(0, noise²) per coordinate, scaled by a random positive norm.
PlantedBundles planted_bundles(std::size_t k, std::size_t r, std::size_t d, double noise,
                               std::uint64_t seed, bool shuffle = true);

/// Two components, two unit directions, where greedy assignment is strictly
/// worse than the exact optimum (0.4 vs 0.8).
struct AdversarialCase {
  DenseMatrix raw;  // 2 × 2
  DenseMatrix q;    // 2 × 2
};

AdversarialCase greedy_adversarial();

}  // namespace badit
