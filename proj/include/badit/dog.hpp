#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "badit/bad.hpp"
#include "badit/linops.hpp"

namespace badit::dog {

inline constexpr double kDefaultEpsG = 1e-12;

/// Unit-normalized rank-1 gradients, one row per component.
struct GradientBatch {
  DenseMatrix vectors;            // rK × (m+n); dead rows are zero
  std::vector<double> raw_norms;  // ‖g_i‖₂ before normalization
  std::vector<bool> dead_mask;    // raw norm < eps_g

  std::size_t size() const noexcept { return vectors.rows(); }
  std::size_t dim() const noexcept { return vectors.cols(); }
  std::size_t live_count() const noexcept;
};

/// Balanced assignment of rK components to K experts, r per expert.
class GroupingPolicy {
 public:
  /// Validates that every expert receives exactly r components.
  GroupingPolicy(std::vector<std::size_t> expert_of, std::size_t k, std::size_t r);

  /// Component i stays in expert i / r.
  static GroupingPolicy identity(std::size_t k, std::size_t r);
  /// Accepts a 0/1 rK×K matrix; rejects anything not row-sum 1 / column-sum r.
  static GroupingPolicy from_matrix(const DenseMatrix& pi, std::size_t r);

  std::size_t k() const noexcept { return k_; }
  std::size_t r() const noexcept { return r_; }
  std::size_t components() const noexcept { return expert_of_.size(); }
  std::size_t expert_of(std::size_t i) const { return expert_of_.at(i); }
  const std::vector<std::size_t>& assignment() const noexcept { return expert_of_; }
  /// Members of expert k in ascending component order.
  std::vector<std::size_t> members(std::size_t k) const;
  DenseMatrix to_matrix() const;

  bool operator==(const GroupingPolicy& other) const = default;

 private:
  std::vector<std::size_t> expert_of_;
  std::size_t k_ = 0;
  std::size_t r_ = 0;
};

/// Hard labels from unconstrained spherical K-means (not capacity feasible).
struct ClusterLabels {
  std::vector<std::optional<std::size_t>> label;  // nullopt for dead components
  DenseMatrix centroids;                          // d × K, unit columns
  int rounds = 0;
};

enum class AssignMode { Exact, Greedy };

const char* to_string(AssignMode mode) noexcept;
AssignMode parse_assign_mode(const std::string& s);

/// Concatenates column j of grad_a[k] and row j of grad_b[k] into row k·r + j.
DenseMatrix extract_rank1_gradients(std::span<const DenseMatrix> grad_a,
                                    std::span<const DenseMatrix> grad_b);

GradientBatch normalize(const DenseMatrix& raw, double eps_g = kDefaultEpsG);

/// Σ_k ‖Σ_i π_ik ĝ_i‖²
double grouping_objective(const GroupingPolicy& pi, const GradientBatch& batch);

struct ObjectiveSplit {
  double intra = 0.0;
  double inter = 0.0;
};

/// intra = grouping_objective, inter = ‖Σ_i ĝ_i‖² − intra.
ObjectiveSplit objective_split(const GroupingPolicy& pi, const GradientBatch& batch);

ClusterLabels spherical_kmeans_init(const GradientBatch& batch, std::size_t k, std::uint64_t seed,
                                    int max_rounds = 50);

/// Columns c_k = Σ_i π_ik ĝ_i (unnormalized).
DenseMatrix centroids(const GroupingPolicy& pi, const GradientBatch& batch);

/// Q = U_c V_cᵀ from the thin SVD of C (d×K, d ≥ K).
DenseMatrix orthogonalize_centroids(const DenseMatrix& raw);

/// Maximizes Σ_i ⟨ĝ_i, q_{π(i)}⟩ with exactly r components per column of q.
/// Dead components are placed after the live ones into the lowest-index
/// experts that still have room.
GroupingPolicy assign_step(const GradientBatch& batch, const DenseMatrix& q, std::size_t r,
                           AssignMode mode = AssignMode::Exact);

/// Σ_i ⟨ĝ_i, q_{π(i)}⟩
double assignment_score(const GroupingPolicy& pi, const GradientBatch& batch, const DenseMatrix& q);

struct DogOptions {
  std::size_t max_iter = 10;
  AssignMode mode = AssignMode::Exact;
  std::uint64_t seed = 0;
};

struct DogResult {
  GroupingPolicy policy;
  std::size_t iterations = 0;
  std::vector<double> objective_trace;  // grouping_objective after each stage
  DenseMatrix q;                        // last orthogonalized directions
  bool converged = false;
  std::vector<std::string> warnings;
};

/// K-means init, capacity projection, then alternate centroids →
/// orthogonalization → assignment until Π stops changing or max_iter loops.
/// When `start` is given the K-means stage is skipped.
DogResult dog_run(const GradientBatch& batch, std::size_t k, std::size_t r, const DogOptions& opts,
                  const std::optional<GroupingPolicy>& start = std::nullopt);

struct RegroupOptions {
  /// Multiply a moved component's A-column by α_u / α_v. Disabled for
  /// input-gated layers, where no constant ratio exists.
  bool rescale = true;
};

/// Physically moves rank-1 components so expert k holds pi.members(k) in
/// ascending order. Routing weights are left untouched.
ExpertBank regroup(const ExpertBank& bank, const GroupingPolicy& pi, RegroupOptions opts = {});

struct GradientAngles {
  std::optional<double> intra_deg;
  std::optional<double> inter_deg;
  std::size_t intra_experts = 0;  // experts with ≥ 2 live members
  std::size_t inter_experts = 0;  // experts with nonzero aggregate
};

GradientAngles gradient_angles(const GradientBatch& batch, const GroupingPolicy& pi);

/// Angle in degrees between two nonzero vectors.
double angle_deg(std::span<const double> x, std::span<const double> y);

}  // namespace badit::dog
