#pragma once

#include <cstdint>
#include <random>

#include "badit/linops.hpp"

namespace badit {

using Rng = std::mt19937_64;

/// splitmix64 mix of a base seed with a stream tag.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, std::uint64_t sub);

DenseMatrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng, double stddev = 1.0);
DenseMatrix uniform_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo, double hi);
/// rows×cols with orthonormal columns (cols ≤ rows), Haar-distributed.
DenseMatrix random_orthonormal(std::size_t rows, std::size_t cols, Rng& rng);

}  // namespace badit
