#include "badit/bad.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>

#include <json.hpp>

#include "badit/matrix_io.hpp"

namespace badit {

ExpertBank::ExpertBank(DenseMatrix residual, std::vector<LoraExpert> experts,
                       std::vector<double> routing, double scale)
    : residual_(std::move(residual)),
      experts_(std::move(experts)),
      routing_(std::move(routing)),
      scale_(scale) {
  if (experts_.empty()) throw Error(ErrorKind::InvalidParameter, "expert bank needs K >= 1");
  if (!(scale_ > 0.0) || !std::isfinite(scale_))
    throw Error(ErrorKind::InvalidParameter, "scale must be positive and finite");
  if (routing_.size() != experts_.size())
    throw Error(ErrorKind::Dimension, "routing length does not match expert count");
  r_ = experts_.front().a.cols();
  for (const auto& e : experts_) {
    if (e.a.rows() != residual_.rows() || e.a.cols() != r_ || e.b.rows() != r_ ||
        e.b.cols() != residual_.cols())
      throw Error(ErrorKind::Dimension, "expert factor shapes disagree with the bank");
  }
  for (double a : routing_)
    if (!std::isfinite(a)) throw Error(ErrorKind::InvalidInput, "routing weight is not finite");
}

const LoraExpert& ExpertBank::expert(std::size_t k) const {
  if (k >= experts_.size())
    throw Error(ErrorKind::IndexOutOfRange, "expert " + std::to_string(k) + " of " +
                                                std::to_string(experts_.size()));
  return experts_[k];
}

LoraExpert& ExpertBank::expert(std::size_t k) {
  return const_cast<LoraExpert&>(std::as_const(*this).expert(k));
}

std::uint64_t ExpertBank::residual_checksum() const {
  std::uint64_t h = 1469598103934665603ull;
  for (double v : residual_.data()) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ull;
    }
  }
  return h;
}

ExpertBank decompose(const DenseMatrix& w, std::size_t k, std::size_t r, double scale) {
  if (k < 1 || r < 1) throw Error(ErrorKind::InvalidParameter, "k and r must be >= 1");
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw Error(ErrorKind::InvalidParameter, "scale must be positive");
  const std::size_t full = std::min(w.rows(), w.cols());
  if (r * k > full)
    throw Error(ErrorKind::Capacity, "r*K = " + std::to_string(r * k) + " exceeds min(m,n) = " +
                                         std::to_string(full));
  const SvdResult svd = thin_svd(w);
  const std::size_t m = w.rows();
  const std::size_t n = w.cols();

  std::vector<LoraExpert> experts;
  experts.reserve(k);
  for (std::size_t e = 0; e < k; ++e) {
    LoraExpert ex{DenseMatrix(m, r), DenseMatrix(r, n)};
    for (std::size_t j = 0; j < r; ++j) {
      const std::size_t idx = e * r + j;
      const double root = std::sqrt(svd.sigma[idx] / scale);
      for (std::size_t i = 0; i < m; ++i) ex.a(i, j) = svd.u(i, idx) * root;
      for (std::size_t i = 0; i < n; ++i) ex.b(j, i) = root * svd.v(i, idx);
    }
    experts.push_back(std::move(ex));
  }

  DenseMatrix residual(m, n);
  const std::size_t tail = full - r * k;
  if (tail > 0) {
    SvdResult rest;
    rest.u = svd.u.col_block(r * k, tail);
    rest.v = svd.v.col_block(r * k, tail);
    rest.sigma.assign(svd.sigma.begin() + static_cast<std::ptrdiff_t>(r * k), svd.sigma.end());
    residual = rest.reconstruct();
  }
  return ExpertBank(std::move(residual), std::move(experts), std::vector<double>(k, 1.0), scale);
}

DenseMatrix expert_delta(const ExpertBank& bank, std::size_t k) {
  const LoraExpert& e = bank.expert(k);
  DenseMatrix d = matmul(e.a, e.b);
  d *= bank.scale();
  return d;
}

DenseMatrix reconstruct(const ExpertBank& bank) {
  DenseMatrix out = bank.residual();
  for (std::size_t k = 0; k < bank.k(); ++k) {
    const double alpha = bank.routing()[k];
    if (alpha == 0.0) continue;
    DenseMatrix d = expert_delta(bank, k);
    d *= alpha;
    out += d;
  }
  return out;
}

double OrthogonalityReport::max_offdiag() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < normalized.rows(); ++i)
    for (std::size_t j = 0; j < normalized.cols(); ++j)
      if (i != j) worst = std::max(worst, std::abs(normalized(i, j)));
  return worst;
}

OrthogonalityReport pairwise_orthogonality(const ExpertBank& bank) {
  const std::size_t k = bank.k();
  std::vector<DenseMatrix> deltas;
  std::vector<double> norms(k);
  deltas.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    deltas.push_back(expert_delta(bank, i));
    norms[i] = frobenius_norm(deltas.back());
  }
  OrthogonalityReport rep{DenseMatrix(k, k), {}};
  for (std::size_t i = 0; i < k; ++i)
    if (norms[i] == 0.0) rep.zero_experts.push_back(i);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      if (norms[i] == 0.0 || norms[j] == 0.0) continue;
      const double v = i == j ? 1.0 : frobenius_inner(deltas[i], deltas[j]) / (norms[i] * norms[j]);
      rep.normalized(i, j) = v;
      rep.normalized(j, i) = v;
    }
  }
  return rep;
}

void save_bank(const ExpertBank& bank, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  io::write_bmat(dir / "residual.bmat", bank.residual());
  for (std::size_t k = 0; k < bank.k(); ++k) {
    const std::string stem = "expert_" + std::to_string(k + 1);
    io::write_bmat(dir / (stem + "_a.bmat"), bank.expert(k).a);
    io::write_bmat(dir / (stem + "_b.bmat"), bank.expert(k).b);
  }
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["k"] = bank.k();
  j["r"] = bank.r();
  j["scale"] = bank.scale();
  j["routing"] = bank.routing();
  io::write_text(dir / "bank.json", j.dump(2) + "\n");
}

ExpertBank load_bank(const std::filesystem::path& dir) {
  std::ifstream in(dir / "bank.json");
  if (!in) throw Error(ErrorKind::Io, "cannot open " + (dir / "bank.json").string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("bank.json: ") + e.what());
  }
  if (j.value("format_version", 0) != 1)
    throw Error(ErrorKind::Format, "bank.json: unsupported format_version");
  const auto k = j.at("k").get<std::size_t>();
  const auto r = j.at("r").get<std::size_t>();
  std::vector<LoraExpert> experts;
  for (std::size_t e = 0; e < k; ++e) {
    const std::string stem = "expert_" + std::to_string(e + 1);
    experts.push_back({io::read_bmat(dir / (stem + "_a.bmat")), io::read_bmat(dir / (stem + "_b.bmat"))});
  }
  ExpertBank bank(io::read_bmat(dir / "residual.bmat"), std::move(experts),
                  j.at("routing").get<std::vector<double>>(), j.at("scale").get<double>());
  if (bank.r() != r) throw Error(ErrorKind::Format, "bank.json rank disagrees with factor files");
  return bank;
}

}  // namespace badit
