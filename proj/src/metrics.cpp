#include "badit/metrics.hpp"

#include <algorithm>

#include "badit/matrix_io.hpp"

namespace badit::harness {

const char* to_string(Setting s) noexcept { return s == Setting::Mixed ? "mixed" : "sequential"; }

Setting parse_setting(const std::string& s) {
  if (s == "mixed") return Setting::Mixed;
  if (s == "sequential") return Setting::Sequential;
  throw Error(ErrorKind::InvalidParameter, "unknown setting '" + s + "'");
}

const char* to_string(ForgetVariant v) noexcept {
  return v == ForgetVariant::AsWritten ? "as_written" : "max_over_history";
}

ForgetVariant parse_forget_variant(const std::string& s) {
  if (s == "as_written") return ForgetVariant::AsWritten;
  if (s == "max_over_history") return ForgetVariant::MaxOverHistory;
  throw Error(ErrorKind::InvalidParameter, "unknown forget variant '" + s + "'");
}

namespace {

void require_nonempty(const ScoreGrid& g) {
  if (g.stages() == 0 || g.tasks() == 0) throw Error(ErrorKind::InvalidInput, "empty score grid");
  require_finite(g.a, "score grid");
}

void require_history(const ScoreGrid& g) {
  require_nonempty(g);
  if (g.stages() != g.tasks())
    throw Error(ErrorKind::Dimension, "sequential metrics need a square T×T grid");
  if (g.tasks() < 2) throw Error(ErrorKind::InvalidInput, "forgetting metrics need T >= 2");
}

}  // namespace

double metric_avg_score(const ScoreGrid& grid) {
  require_nonempty(grid);
  const auto last = grid.a.row(grid.stages() - 1);
  double s = 0.0;
  for (double v : last) s += v;
  return s / static_cast<double>(grid.tasks());
}

double metric_forward(const ScoreGrid& grid, Setting setting) {
  require_nonempty(grid);
  if (!grid.baseline) throw Error(ErrorKind::InvalidInput, "forward transfer needs a baseline");
  const auto& base = *grid.baseline;
  const std::size_t t_count = grid.tasks();
  if (base.size() != t_count) throw Error(ErrorKind::Dimension, "baseline length differs from T");
  double s = 0.0;
  if (setting == Setting::Mixed) {
    const std::size_t last = grid.stages() - 1;
    for (std::size_t t = 0; t < t_count; ++t) s += grid.a(last, t) - base[t];
  } else {
    if (grid.stages() != t_count)
      throw Error(ErrorKind::Dimension, "sequential forward needs a square grid");
    for (std::size_t t = 0; t < t_count; ++t) s += grid.a(t, t) - base[t];
  }
  return s / static_cast<double>(t_count);
}

double metric_forget(const ScoreGrid& grid, ForgetVariant variant) {
  require_history(grid);
  const std::size_t t_count = grid.tasks();
  const std::size_t last = t_count - 1;
  double s = 0.0;
  for (std::size_t t = 0; t < last; ++t) {
    double ref = grid.a(t, t);
    if (variant == ForgetVariant::MaxOverHistory)
      for (std::size_t st = t; st < t_count; ++st) ref = std::max(ref, grid.a(st, t));
    s += ref - grid.a(last, t);
  }
  return s / static_cast<double>(last);
}

double metric_backward(const ScoreGrid& grid) {
  require_history(grid);
  const std::size_t last = grid.tasks() - 1;
  double s = 0.0;
  for (std::size_t t = 0; t < last; ++t) s += grid.a(last, t) - grid.a(t, t);
  return s / static_cast<double>(last);
}

ScoreGrid load_grid(const std::filesystem::path& grid_csv,
                    const std::optional<std::filesystem::path>& baseline_csv) {
  ScoreGrid g{io::read_csv(grid_csv), std::nullopt};
  if (baseline_csv) {
    const DenseMatrix b = io::read_csv(*baseline_csv);
    if (b.rows() != 1 && b.cols() != 1) throw Error(ErrorKind::Format, "baseline must be a single row or column");
    g.baseline = std::vector<double>(b.data().begin(), b.data().end());
    if (g.baseline->size() != g.tasks()) throw Error(ErrorKind::Dimension, "baseline length differs from T");
  }
  return g;
}

}  // namespace badit::harness
