#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "badit/linops.hpp"

namespace badit {

/// One low-rank expert: ΔW = scale · a · b with a (m×r) and b (r×n).
struct LoraExpert {
  DenseMatrix a;
  DenseMatrix b;

  bool operator==(const LoraExpert& other) const = default;
};

/// Frozen residual plus K rank-r experts and their routing weights.
///
/// The residual is only reachable through a const accessor; trainers mutate
/// experts and routing, never the residual.
class ExpertBank {
 public:
  ExpertBank() = default;
  ExpertBank(DenseMatrix residual, std::vector<LoraExpert> experts, std::vector<double> routing,
             double scale);

  const DenseMatrix& residual() const noexcept { return residual_; }
  std::size_t k() const noexcept { return experts_.size(); }
  std::size_t r() const noexcept { return r_; }
  std::size_t rows() const noexcept { return residual_.rows(); }
  std::size_t cols() const noexcept { return residual_.cols(); }
  double scale() const noexcept { return scale_; }

  const std::vector<LoraExpert>& experts() const noexcept { return experts_; }
  std::vector<LoraExpert>& experts() noexcept { return experts_; }
  const LoraExpert& expert(std::size_t k) const;
  LoraExpert& expert(std::size_t k);

  const std::vector<double>& routing() const noexcept { return routing_; }
  std::vector<double>& routing() noexcept { return routing_; }

  /// FNV-1a over the residual's bytes; used to check the frozen contract.
  std::uint64_t residual_checksum() const;

  bool operator==(const ExpertBank& other) const = default;

 private:
  DenseMatrix residual_;
  std::vector<LoraExpert> experts_;
  std::vector<double> routing_;
  double scale_ = 1.0;
  std::size_t r_ = 0;
};

/// Splits w by SVD: expert k (0-based) takes singular triplets [k·r, (k+1)·r),
/// A_k = U_k·diag(√(Σ_k/s)), B_k = diag(√(Σ_k/s))·V_kᵀ, so s·A_k B_k = U_k Σ_k V_kᵀ.
/// The tail beyond r·K becomes the residual and all routing weights start at 1.
ExpertBank decompose(const DenseMatrix& w, std::size_t k, std::size_t r, double scale = 1.0);

/// s·A_k B_k, without the routing weight. `k` is 0-based.
DenseMatrix expert_delta(const ExpertBank& bank, std::size_t k);

/// Ŵ + Σ_k α_k s A_k B_k
DenseMatrix reconstruct(const ExpertBank& bank);

struct OrthogonalityReport {
  /// (k,l) = ⟨ΔW_k, ΔW_l⟩ / (‖ΔW_k‖‖ΔW_l‖); rows/cols of zero experts are 0.
  DenseMatrix normalized;
  /// Experts whose delta has zero norm; their diagonal entry is undefined.
  std::vector<std::size_t> zero_experts;

  /// Largest |entry| off the diagonal.
  double max_offdiag() const;
};

OrthogonalityReport pairwise_orthogonality(const ExpertBank& bank);

/// Directory layout: residual.bmat, expert_{k}_a.bmat, expert_{k}_b.bmat and
/// bank.json {k, r, scale, routing[], format_version}. Expert files are 1-based.
void save_bank(const ExpertBank& bank, const std::filesystem::path& dir);
ExpertBank load_bank(const std::filesystem::path& dir);

}  // namespace badit
