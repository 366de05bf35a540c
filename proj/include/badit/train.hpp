#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "badit/dog.hpp"
#include "badit/metrics.hpp"
#include "badit/moe.hpp"
#include "badit/tasks.hpp"

namespace badit::harness {

struct TrainConfig {
  std::size_t k = 4;
  std::size_t r = 4;
  double scale = 1.0;
  moe::GateMode gate_mode = moe::GateMode::ScalarAlpha;
  std::size_t top_k = 2;
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  double learning_rate = 1e-2;
  bool dog_enabled = true;
  dog::AssignMode mode = dog::AssignMode::Exact;
  std::size_t max_iter = 10;
  double eps_g = dog::kDefaultEpsG;
  /// Batches between regroup events.
  std::size_t regroup_interval = 1;
  bool compute_baseline = true;
  std::uint64_t seed = 0;
};

/// One regroup event (or, without DOG, one angle sample under the current
/// grouping), measured on the batch that triggered it.
struct AngleEvent {
  std::size_t stage = 0;
  std::size_t epoch = 0;  // global, 1-based
  std::size_t batch = 0;
  std::optional<double> intra_deg;
  std::optional<double> inter_deg;
  std::size_t dog_iterations = 0;
  std::size_t moved = 0;  // components that changed expert
};

struct EpochAngles {
  std::size_t epoch = 0;
  std::optional<double> intra_deg;
  std::optional<double> inter_deg;
};

struct TrainResult {
  ScoreGrid grid;
  std::vector<std::size_t> order;  // grid column t holds task order[t]
  std::vector<AngleEvent> events;
  std::vector<EpochAngles> epoch_angles;
  std::uint64_t residual_checksum_before = 0;
  std::uint64_t residual_checksum_after = 0;
  std::vector<std::string> warnings;
  moe::MoeLoraLayer layer;
};

/// BAD-initialized layer on the task set's pretrained weights.
moe::MoeLoraLayer make_layer(const SyntheticTaskSet& tasks, const TrainConfig& cfg);

/// 100 · max(0, 1 − Σ‖h − y‖² / Σ‖y − ȳ‖²) on the eval split.
double score(const moe::MoeLoraLayer& layer, const TaskData& task);

/// Trains tasks one after another in `order`, evaluating every task after
/// each stage.
TrainResult train_sequential(const SyntheticTaskSet& tasks, const std::vector<std::size_t>& order,
                             const TrainConfig& cfg);

/// Trains on the union of all tasks with shuffled interleaved batches; the
/// grid has a single row.
TrainResult train_mixed(const SyntheticTaskSet& tasks, const TrainConfig& cfg);

/// Isolated single-task score for every task, indexed by task id.
std::vector<double> isolated_baselines(const SyntheticTaskSet& tasks, const TrainConfig& cfg);

}  // namespace badit::harness
