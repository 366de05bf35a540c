#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "badit/metrics.hpp"
#include "badit/tasks.hpp"
#include "badit/train.hpp"

namespace badit::harness {

/// Parsed run_config.json. Sections: tasks, model, training, dog, seeds.
struct RunConfig {
  TaskSpec tasks;
  TrainConfig train;
  Setting setting = Setting::Sequential;
  /// Explicit task order; otherwise a permutation derived from the seed.
  std::optional<std::vector<std::size_t>> order;
  std::vector<std::uint64_t> seeds{0};
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// Reference values a grid is compared against in the report.
struct MetricReference {
  std::optional<double> avg;
  std::optional<double> forget;
  std::optional<double> backward;
};

/// metrics.json body: all four metrics, both forget variants, and, when a
/// reference is given, a `discrepancy` block naming which variant (if any)
/// reproduces it. Metrics that the grid shape does not support are null.
nlohmann::ordered_json metrics_report(const ScoreGrid& grid, Setting setting,
                                      const MetricReference& ref = {}, double tolerance = 0.05);

std::vector<std::size_t> task_order(const RunConfig& cfg, std::uint64_t seed);
TrainResult execute(const RunConfig& cfg, std::uint64_t seed);

/// scores.csv, angles.csv, events.csv, metrics.json into `dir`.
void write_outputs(const RunConfig& cfg, std::uint64_t seed, const TrainResult& res,
                   const std::filesystem::path& dir);

/// Runs every seed; with more than one seed each goes to dir/seed_<s>.
/// Returns false if any run broke the frozen-residual contract.
bool run_experiment(const RunConfig& cfg, const std::filesystem::path& dir, std::size_t jobs = 1);

}  // namespace badit::harness
