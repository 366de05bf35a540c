#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "badit/linops.hpp"

namespace badit::harness {

/// a(s, t): score on task t (columns in training order) after stage s.
/// `baseline[t]` is the isolated single-task score. Higher is better.
struct ScoreGrid {
  DenseMatrix a;
  std::optional<std::vector<double>> baseline;

  std::size_t stages() const noexcept { return a.rows(); }
  std::size_t tasks() const noexcept { return a.cols(); }
};

enum class Setting { Mixed, Sequential };
enum class ForgetVariant { AsWritten, MaxOverHistory };

const char* to_string(Setting s) noexcept;
Setting parse_setting(const std::string& s);
const char* to_string(ForgetVariant v) noexcept;
ForgetVariant parse_forget_variant(const std::string& s);

/// Mean of the final row.
double metric_avg_score(const ScoreGrid& grid);
/// Mixed: mean(a[T][t] − base[t]); sequential: mean(a[t][t] − base[t]).
double metric_forward(const ScoreGrid& grid, Setting setting);
/// mean over t < T of (a[t][t] − a[T][t]); the history variant replaces
/// a[t][t] with max over stages s ≥ t.
double metric_forget(const ScoreGrid& grid, ForgetVariant variant = ForgetVariant::AsWritten);
/// mean over t < T of (a[T][t] − a[t][t]).
double metric_backward(const ScoreGrid& grid);

/// Grid from a numeric CSV (rows = stages, cols = tasks), optional baseline
/// CSV holding one row or one column of T values.
ScoreGrid load_grid(const std::filesystem::path& grid_csv,
                    const std::optional<std::filesystem::path>& baseline_csv = std::nullopt);

}  // namespace badit::harness
