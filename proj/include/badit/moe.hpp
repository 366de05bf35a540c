#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "badit/bad.hpp"
#include "badit/dog.hpp"

namespace badit::moe {

enum class GateMode { ScalarAlpha, InputTopK };

const char* to_string(GateMode mode) noexcept;
GateMode parse_gate_mode(const std::string& s);

/// Frozen residual + LoRA experts with either the bank's scalar routing
/// weights or an input-dependent top-k softmax gate.
class MoeLoraLayer {
 public:
  explicit MoeLoraLayer(ExpertBank bank);
  /// Input-gated layer; router is n×K (logits = routerᵀx).
  MoeLoraLayer(ExpertBank bank, DenseMatrix router, std::size_t top_k);

  GateMode gate_mode() const noexcept { return mode_; }
  std::size_t top_k() const noexcept { return top_k_; }
  const ExpertBank& bank() const noexcept { return bank_; }
  ExpertBank& bank() noexcept { return bank_; }
  const std::optional<DenseMatrix>& router() const noexcept { return router_; }
  std::optional<DenseMatrix>& router() noexcept { return router_; }

  std::size_t input_dim() const noexcept { return bank_.cols(); }
  std::size_t output_dim() const noexcept { return bank_.rows(); }

 private:
  ExpertBank bank_;
  GateMode mode_ = GateMode::ScalarAlpha;
  std::optional<DenseMatrix> router_;
  std::size_t top_k_ = 0;
};

struct LayerGradients {
  std::vector<DenseMatrix> grad_a;  // K × (m×r)
  std::vector<DenseMatrix> grad_b;  // K × (r×n)
  std::vector<double> grad_alpha;   // K; zero in input_topk mode
  std::optional<DenseMatrix> grad_router;

  /// Zero gradients shaped like `layer`.
  static LayerGradients zeros_like(const MoeLoraLayer& layer);
  LayerGradients& operator+=(const LayerGradients& other);
  LayerGradients& operator*=(double s);
};

/// Softmax over the top_k largest router logits, zero elsewhere. Ties in the
/// logits go to the lower expert index.
std::vector<double> gate_weights(const MoeLoraLayer& layer, std::span<const double> x);

/// Per-expert coefficient g_k(x): the routing weight α_k or the gate weight.
std::vector<double> expert_coefficients(const MoeLoraLayer& layer, std::span<const double> x);

/// h = Ŵx + Σ_k g_k(x) · s · A_k (B_k x)
std::vector<double> forward(const MoeLoraLayer& layer, std::span<const double> x);

/// Gradients of ⟨upstream, forward(x)⟩. In gated mode the top-k support is
/// held fixed when differentiating through the router.
LayerGradients backward(const MoeLoraLayer& layer, std::span<const double> x,
                        std::span<const double> upstream);

struct RegroupOutcome {
  MoeLoraLayer layer;
  std::optional<std::string> warning;
};

/// Regroups the layer's bank. Gated layers are regrouped without rescaling
/// and carry a warning, since their output is not preserved.
RegroupOutcome regroup_layer(const MoeLoraLayer& layer, const dog::GroupingPolicy& pi);

/// Bank directory plus layer.json {format_version, gate_mode, top_k, router}.
void save_layer(const MoeLoraLayer& layer, const std::filesystem::path& dir);
MoeLoraLayer load_layer(const std::filesystem::path& dir);

}  // namespace badit::moe
