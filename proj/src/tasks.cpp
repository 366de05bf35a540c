#include "badit/tasks.hpp"

#include <cmath>

#include "badit/random.hpp"

namespace badit {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, std::uint64_t sub) {
  return derive_seed(derive_seed(base, tag), sub);
}

DenseMatrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng, double stddev) {
  std::normal_distribution<double> nd(0.0, stddev);
  DenseMatrix m(rows, cols);
  for (double& v : m.data()) v = nd(rng);
  return m;
}

DenseMatrix uniform_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> ud(lo, hi);
  DenseMatrix m(rows, cols);
  for (double& v : m.data()) v = ud(rng);
  return m;
}

DenseMatrix random_orthonormal(std::size_t rows, std::size_t cols, Rng& rng) {
  if (cols > rows) throw Error(ErrorKind::Dimension, "random_orthonormal needs cols <= rows");
  DenseMatrix g = gaussian_matrix(rows, cols, rng);
  // Modified Gram-Schmidt, applied twice; positive R diagonal gives Haar measure.
  for (std::size_t j = 0; j < cols; ++j) {
    auto cj = g.col(j);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t p = 0; p < j; ++p) {
        const auto cp = g.col(p);
        const double proj = dot(cj, cp);
        for (std::size_t i = 0; i < rows; ++i) cj[i] -= proj * cp[i];
      }
    }
    const double nrm = norm2(cj);
    for (double& v : cj) v /= nrm;
    g.set_col(j, cj);
  }
  return g;
}

}  // namespace badit

namespace badit::harness {

namespace {

enum Stream : std::uint64_t { kCore = 1, kBase = 2, kTask = 3 };

void sample_inputs(DenseMatrix& x, std::span<const double> mean, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  for (std::size_t s = 0; s < x.rows(); ++s)
    for (std::size_t j = 0; j < x.cols(); ++j) x(s, j) = mean[j] + nd(rng);
}

DenseMatrix targets(const DenseMatrix& teacher, const DenseMatrix& x, double noise, Rng& rng) {
  DenseMatrix y = matmul_nt(x, teacher);
  if (noise > 0.0) {
    std::normal_distribution<double> nd(0.0, noise);
    for (double& v : y.data()) v += nd(rng);
  }
  return y;
}

}  // namespace

SyntheticTaskSet make_tasks(const TaskSpec& spec) {
  if (spec.count < 1) throw Error(ErrorKind::InvalidParameter, "need at least one task");
  if (spec.input_dim == 0 || spec.output_dim == 0 || spec.rank == 0 ||
      spec.rank > std::min(spec.input_dim, spec.output_dim))
    throw Error(ErrorKind::Dimension, "invalid task dimensions");
  if (spec.train_samples == 0 || spec.eval_samples == 0)
    throw Error(ErrorKind::InvalidParameter, "sample counts must be positive");
  if (spec.noise < 0.0) throw Error(ErrorKind::InvalidParameter, "noise must be nonnegative");

  const std::size_t m = spec.output_dim;
  const std::size_t n = spec.input_dim;
  SyntheticTaskSet set;
  set.spec = spec;

  Rng core_rng(derive_seed(spec.seed, kCore));
  set.core_left = random_orthonormal(m, spec.rank, core_rng);
  const DenseMatrix right = random_orthonormal(n, spec.rank, core_rng);
  DenseMatrix scaled = set.core_left;
  for (std::size_t j = 0; j < spec.rank; ++j) {
    // Distinct, well-separated core singular values: 2.0, 1.75, 1.5, ...
    const double sv = 2.0 * std::pow(0.875, static_cast<double>(j));
    for (std::size_t i = 0; i < m; ++i) scaled(i, j) *= sv;
  }
  set.core = matmul_nt(scaled, right);

  Rng base_rng(derive_seed(spec.seed, kBase));
  set.base = set.core + gaussian_matrix(m, n, base_rng, spec.base_noise / std::sqrt(static_cast<double>(n)));

  for (std::size_t t = 0; t < spec.count; ++t) {
    Rng rng(derive_seed(spec.seed, kTask, t));
    const DenseMatrix lrot = random_orthonormal(m, m, rng);
    const DenseMatrix rrot = random_orthonormal(n, n, rng);
    TaskData task;
    task.teacher = set.core + spec.rotation_strength * matmul_nt(matmul(lrot, set.core), rrot);

    std::vector<double> mean(n);
    {
      std::normal_distribution<double> nd(0.0, 1.0);
      for (double& v : mean) v = nd(rng);
      const double nrm = norm2(mean);
      for (double& v : mean) v *= spec.input_shift / nrm;
    }
    task.train_x = DenseMatrix(spec.train_samples, n);
    task.eval_x = DenseMatrix(spec.eval_samples, n);
    sample_inputs(task.train_x, mean, rng);
    task.train_y = targets(task.teacher, task.train_x, spec.noise, rng);
    sample_inputs(task.eval_x, mean, rng);
    task.eval_y = targets(task.teacher, task.eval_x, spec.noise, rng);
    set.tasks.push_back(std::move(task));
  }
  return set;
}

}  // namespace badit::harness
