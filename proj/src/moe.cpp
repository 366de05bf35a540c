#include "badit/moe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "badit/matrix_io.hpp"

namespace badit::moe {

const char* to_string(GateMode mode) noexcept {
  return mode == GateMode::ScalarAlpha ? "scalar_alpha" : "input_topk";
}

GateMode parse_gate_mode(const std::string& s) {
  if (s == "scalar_alpha") return GateMode::ScalarAlpha;
  if (s == "input_topk") return GateMode::InputTopK;
  throw Error(ErrorKind::InvalidParameter, "unknown gate mode '" + s + "'");
}

MoeLoraLayer::MoeLoraLayer(ExpertBank bank) : bank_(std::move(bank)) {}

MoeLoraLayer::MoeLoraLayer(ExpertBank bank, DenseMatrix router, std::size_t top_k)
    : bank_(std::move(bank)), mode_(GateMode::InputTopK), router_(std::move(router)), top_k_(top_k) {
  if (top_k_ < 1 || top_k_ > bank_.k())
    throw Error(ErrorKind::InvalidParameter, "top_k must lie in [1, K]");
  if (router_->rows() != bank_.cols() || router_->cols() != bank_.k())
    throw Error(ErrorKind::Dimension, "router must be n×K");
}

LayerGradients LayerGradients::zeros_like(const MoeLoraLayer& layer) {
  const ExpertBank& b = layer.bank();
  LayerGradients g;
  for (std::size_t k = 0; k < b.k(); ++k) {
    g.grad_a.emplace_back(b.rows(), b.r());
    g.grad_b.emplace_back(b.r(), b.cols());
  }
  g.grad_alpha.assign(b.k(), 0.0);
  if (layer.router()) g.grad_router = DenseMatrix(layer.router()->rows(), layer.router()->cols());
  return g;
}

LayerGradients& LayerGradients::operator+=(const LayerGradients& other) {
  for (std::size_t k = 0; k < grad_a.size(); ++k) {
    grad_a[k] += other.grad_a[k];
    grad_b[k] += other.grad_b[k];
    grad_alpha[k] += other.grad_alpha[k];
  }
  if (grad_router && other.grad_router) *grad_router += *other.grad_router;
  return *this;
}

LayerGradients& LayerGradients::operator*=(double s) {
  for (std::size_t k = 0; k < grad_a.size(); ++k) {
    grad_a[k] *= s;
    grad_b[k] *= s;
    grad_alpha[k] *= s;
  }
  if (grad_router) *grad_router *= s;
  return *this;
}

namespace {

void require_len(std::span<const double> v, std::size_t n, const char* what) {
  if (v.size() != n)
    throw Error(ErrorKind::Dimension, std::string(what) + " has length " + std::to_string(v.size()) +
                                          ", expected " + std::to_string(n));
}

std::vector<std::size_t> top_support(std::span<const double> logits, std::size_t top_k) {
  std::vector<std::size_t> idx(logits.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return logits[a] > logits[b]; });
  idx.resize(top_k);
  return idx;
}

}  // namespace

std::vector<double> gate_weights(const MoeLoraLayer& layer, std::span<const double> x) {
  if (layer.gate_mode() != GateMode::InputTopK)
    throw Error(ErrorKind::Mode, "gate_weights requires input_topk mode");
  require_len(x, layer.input_dim(), "input");
  const std::vector<double> logits = matvec_t(*layer.router(), x);
  const auto support = top_support(logits, layer.top_k());
  double zmax = logits[support.front()];
  std::vector<double> w(logits.size(), 0.0);
  double total = 0.0;
  for (std::size_t k : support) {
    w[k] = std::exp(logits[k] - zmax);
    total += w[k];
  }
  for (std::size_t k : support) w[k] /= total;
  return w;
}

std::vector<double> expert_coefficients(const MoeLoraLayer& layer, std::span<const double> x) {
  if (layer.gate_mode() == GateMode::ScalarAlpha) return layer.bank().routing();
  return gate_weights(layer, x);
}

std::vector<double> forward(const MoeLoraLayer& layer, std::span<const double> x) {
  require_len(x, layer.input_dim(), "input");
  const ExpertBank& bank = layer.bank();
  std::vector<double> h = matvec(bank.residual(), x);
  const std::vector<double> coef = expert_coefficients(layer, x);
  for (std::size_t k = 0; k < bank.k(); ++k) {
    if (coef[k] == 0.0) continue;
    const LoraExpert& e = bank.expert(k);
    const std::vector<double> bx = matvec(e.b, x);
    const std::vector<double> abx = matvec(e.a, bx);
    const double c = coef[k] * bank.scale();
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += c * abx[i];
  }
  return h;
}

LayerGradients backward(const MoeLoraLayer& layer, std::span<const double> x,
                        std::span<const double> upstream) {
  require_len(x, layer.input_dim(), "input");
  require_len(upstream, layer.output_dim(), "upstream");
  const ExpertBank& bank = layer.bank();
  const double s = bank.scale();
  const std::vector<double> coef = expert_coefficients(layer, x);
  LayerGradients g = LayerGradients::zeros_like(layer);
  std::vector<double> contrib(bank.k(), 0.0);  // ⟨u, s A_k B_k x⟩

  for (std::size_t k = 0; k < bank.k(); ++k) {
    const LoraExpert& e = bank.expert(k);
    const std::vector<double> bx = matvec(e.b, x);
    const std::vector<double> atu = matvec_t(e.a, upstream);
    contrib[k] = s * dot(atu, bx);
    const double c = coef[k] * s;
    if (c == 0.0) continue;
    DenseMatrix& ga = g.grad_a[k];
    for (std::size_t i = 0; i < ga.rows(); ++i)
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) = c * upstream[i] * bx[j];
    DenseMatrix& gb = g.grad_b[k];
    for (std::size_t j = 0; j < gb.rows(); ++j)
      for (std::size_t i = 0; i < gb.cols(); ++i) gb(j, i) = c * atu[j] * x[i];
  }

  if (layer.gate_mode() == GateMode::ScalarAlpha) {
    g.grad_alpha = contrib;
  } else {
    double mean = 0.0;
    for (std::size_t k = 0; k < bank.k(); ++k) mean += coef[k] * contrib[k];
    DenseMatrix& gr = *g.grad_router;
    for (std::size_t k = 0; k < bank.k(); ++k) {
      if (coef[k] == 0.0) continue;
      const double dz = coef[k] * (contrib[k] - mean);
      for (std::size_t j = 0; j < gr.rows(); ++j) gr(j, k) = x[j] * dz;
    }
  }
  return g;
}

RegroupOutcome regroup_layer(const MoeLoraLayer& layer, const dog::GroupingPolicy& pi) {
  if (layer.gate_mode() == GateMode::ScalarAlpha)
    return {MoeLoraLayer(dog::regroup(layer.bank(), pi)), std::nullopt};
  MoeLoraLayer out(dog::regroup(layer.bank(), pi, {.rescale = false}), *layer.router(), layer.top_k());
  return {std::move(out),
          "input-gated layer regrouped without rescaling; layer output is not preserved"};
}

void save_layer(const MoeLoraLayer& layer, const std::filesystem::path& dir) {
  save_bank(layer.bank(), dir);
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["gate_mode"] = to_string(layer.gate_mode());
  j["top_k"] = layer.top_k();
  if (layer.router()) {
    io::write_bmat(dir / "router.bmat", *layer.router());
    j["router"] = "router.bmat";
  } else {
    j["router"] = nullptr;
  }
  io::write_text(dir / "layer.json", j.dump(2) + "\n");
}

MoeLoraLayer load_layer(const std::filesystem::path& dir) {
  ExpertBank bank = load_bank(dir);
  std::ifstream in(dir / "layer.json");
  if (!in) return MoeLoraLayer(std::move(bank));
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("layer.json: ") + e.what());
  }
  if (j.value("format_version", 0) != 1)
    throw Error(ErrorKind::Format, "layer.json: unsupported format_version");
  const GateMode mode = parse_gate_mode(j.at("gate_mode").get<std::string>());
  if (mode == GateMode::ScalarAlpha) return MoeLoraLayer(std::move(bank));
  if (!j.contains("router") || j["router"].is_null())
    throw Error(ErrorKind::Format, "layer.json: input_topk layer without router");
  DenseMatrix router = io::read_bmat(dir / j["router"].get<std::string>());
  return MoeLoraLayer(std::move(bank), std::move(router), j.at("top_k").get<std::size_t>());
}

}  // namespace badit::moe
