#pragma once

#include <cstdint>
#include <vector>

#include "badit/linops.hpp"

namespace badit::harness {

struct TaskSpec {
  std::size_t count = 4;
  std::size_t input_dim = 32;
  std::size_t output_dim = 32;
  std::size_t rank = 4;
  double noise = 0.01;
  std::size_t train_samples = 64;
  std::size_t eval_samples = 64;
  /// Weight of each task's rotated copy of the shared core.
  double rotation_strength = 1.0;
  /// Norm of each task's input mean.
  double input_shift = 1.0;
  /// Isotropic perturbation of the pretrained weights around the core.
  double base_noise = 0.05;
  std::uint64_t seed = 0;
};

struct TaskData {
  DenseMatrix teacher;  // m×n
  DenseMatrix train_x;  // N×n
  DenseMatrix train_y;  // N×m
  DenseMatrix eval_x;
  DenseMatrix eval_y;
};

/// Linear regression tasks sharing a low-rank core.
///
/// teacher_t = core + ρ · L_t · core · R_tᵀ with Haar-random orthogonal L_t,
/// R_t, so every teacher's column space contains the core's. Inputs are
/// μ_t + N(0, I), targets teacher_t·x + noise. `base` plays the pretrained
/// weight matrix: the core plus a small isotropic perturbation.
struct SyntheticTaskSet {
  TaskSpec spec;
  DenseMatrix core;
  DenseMatrix core_left;  // m×rank orthonormal basis of the core's column space
  DenseMatrix base;
  std::vector<TaskData> tasks;

  std::size_t size() const noexcept { return tasks.size(); }
};

SyntheticTaskSet make_tasks(const TaskSpec& spec);

}  // namespace badit::harness
