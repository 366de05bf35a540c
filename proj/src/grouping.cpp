#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "badit/dog.hpp"

namespace badit::dog {

std::size_t GradientBatch::live_count() const noexcept {
  return static_cast<std::size_t>(std::count(dead_mask.begin(), dead_mask.end(), false));
}

GroupingPolicy::GroupingPolicy(std::vector<std::size_t> expert_of, std::size_t k, std::size_t r)
    : expert_of_(std::move(expert_of)), k_(k), r_(r) {
  if (k_ == 0 || r_ == 0) throw Error(ErrorKind::ConstraintViolation, "grouping needs K, r >= 1");
  if (expert_of_.size() != k_ * r_)
    throw Error(ErrorKind::ConstraintViolation, "grouping has " + std::to_string(expert_of_.size()) +
                                                    " components, expected r*K = " +
                                                    std::to_string(k_ * r_));
  std::vector<std::size_t> load(k_, 0);
  for (std::size_t e : expert_of_) {
    if (e >= k_) throw Error(ErrorKind::ConstraintViolation, "expert index out of range");
    ++load[e];
  }
  for (std::size_t e = 0; e < k_; ++e)
    if (load[e] != r_)
      throw Error(ErrorKind::ConstraintViolation, "expert " + std::to_string(e) + " has " +
                                                      std::to_string(load[e]) + " components, expected " +
                                                      std::to_string(r_));
}

GroupingPolicy GroupingPolicy::identity(std::size_t k, std::size_t r) {
  std::vector<std::size_t> a(k * r);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = i / r;
  return GroupingPolicy(std::move(a), k, r);
}

GroupingPolicy GroupingPolicy::from_matrix(const DenseMatrix& pi, std::size_t r) {
  std::vector<std::size_t> a(pi.rows());
  for (std::size_t i = 0; i < pi.rows(); ++i) {
    std::size_t ones = 0;
    for (std::size_t k = 0; k < pi.cols(); ++k) {
      const double v = pi(i, k);
      if (v == 1.0) {
        a[i] = k;
        ++ones;
      } else if (v != 0.0) {
        throw Error(ErrorKind::ConstraintViolation, "grouping matrix entries must be 0 or 1");
      }
    }
    if (ones != 1)
      throw Error(ErrorKind::ConstraintViolation, "row " + std::to_string(i) + " does not sum to 1");
  }
  return GroupingPolicy(std::move(a), pi.cols(), r);
}

std::vector<std::size_t> GroupingPolicy::members(std::size_t k) const {
  std::vector<std::size_t> out;
  out.reserve(r_);
  for (std::size_t i = 0; i < expert_of_.size(); ++i)
    if (expert_of_[i] == k) out.push_back(i);
  return out;
}

DenseMatrix GroupingPolicy::to_matrix() const {
  DenseMatrix m(expert_of_.size(), k_);
  for (std::size_t i = 0; i < expert_of_.size(); ++i) m(i, expert_of_[i]) = 1.0;
  return m;
}

const char* to_string(AssignMode mode) noexcept {
  return mode == AssignMode::Exact ? "exact" : "greedy";
}

AssignMode parse_assign_mode(const std::string& s) {
  if (s == "exact") return AssignMode::Exact;
  if (s == "greedy") return AssignMode::Greedy;
  throw Error(ErrorKind::InvalidParameter, "unknown assignment mode '" + s + "'");
}

DenseMatrix extract_rank1_gradients(std::span<const DenseMatrix> grad_a,
                                    std::span<const DenseMatrix> grad_b) {
  if (grad_a.size() != grad_b.size() || grad_a.empty())
    throw Error(ErrorKind::Dimension, "need one A and one B gradient per expert");
  const std::size_t m = grad_a.front().rows();
  const std::size_t r = grad_a.front().cols();
  const std::size_t n = grad_b.front().cols();
  const std::size_t k = grad_a.size();
  DenseMatrix g(r * k, m + n);
  for (std::size_t e = 0; e < k; ++e) {
    if (grad_a[e].rows() != m || grad_a[e].cols() != r || grad_b[e].rows() != r ||
        grad_b[e].cols() != n)
      throw Error(ErrorKind::Dimension, "gradient shapes differ for expert " + std::to_string(e));
    for (std::size_t j = 0; j < r; ++j) {
      auto row = g.row(e * r + j);
      for (std::size_t i = 0; i < m; ++i) row[i] = grad_a[e](i, j);
      for (std::size_t i = 0; i < n; ++i) row[m + i] = grad_b[e](j, i);
    }
  }
  return g;
}

GradientBatch normalize(const DenseMatrix& raw, double eps_g) {
  if (!(eps_g > 0.0)) throw Error(ErrorKind::InvalidParameter, "eps_g must be positive");
  GradientBatch b{DenseMatrix(raw.rows(), raw.cols()), std::vector<double>(raw.rows()),
                  std::vector<bool>(raw.rows(), false)};
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    const double nrm = norm2(raw.row(i));
    b.raw_norms[i] = nrm;
    if (!(nrm >= eps_g)) {
      b.dead_mask[i] = true;
      continue;
    }
    auto src = raw.row(i);
    auto dst = b.vectors.row(i);
    for (std::size_t j = 0; j < src.size(); ++j) dst[j] = src[j] / nrm;
  }
  return b;
}

namespace {

void require_match(const GroupingPolicy& pi, const GradientBatch& batch) {
  if (pi.components() != batch.size())
    throw Error(ErrorKind::Dimension, "grouping covers " + std::to_string(pi.components()) +
                                          " components, batch has " + std::to_string(batch.size()));
}

}  // namespace

DenseMatrix centroids(const GroupingPolicy& pi, const GradientBatch& batch) {
  require_match(pi, batch);
  DenseMatrix c(batch.dim(), pi.k());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const std::size_t k = pi.expert_of(i);
    auto g = batch.vectors.row(i);
    for (std::size_t d = 0; d < g.size(); ++d) c(d, k) += g[d];
  }
  return c;
}

double grouping_objective(const GroupingPolicy& pi, const GradientBatch& batch) {
  const DenseMatrix c = centroids(pi, batch);
  double total = 0.0;
  for (std::size_t k = 0; k < c.cols(); ++k) {
    const auto col = c.col(k);
    total += dot(col, col);
  }
  return total;
}

ObjectiveSplit objective_split(const GroupingPolicy& pi, const GradientBatch& batch) {
  ObjectiveSplit s;
  s.intra = grouping_objective(pi, batch);
  std::vector<double> sum(batch.dim(), 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto g = batch.vectors.row(i);
    for (std::size_t d = 0; d < g.size(); ++d) sum[d] += g[d];
  }
  s.inter = dot(sum, sum) - s.intra;
  return s;
}

DenseMatrix orthogonalize_centroids(const DenseMatrix& raw) {
  if (raw.rows() < raw.cols())
    throw Error(ErrorKind::Dimension, "centroid matrix needs d >= K, got " +
                                          std::to_string(raw.rows()) + "x" + std::to_string(raw.cols()));
  const SvdResult svd = thin_svd(raw);
  return matmul_nt(svd.u, svd.v);
}

double angle_deg(std::span<const double> x, std::span<const double> y) {
  const double c = dot(x, y) / (norm2(x) * norm2(y));
  return std::acos(std::clamp(c, -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

GradientAngles gradient_angles(const GradientBatch& batch, const GroupingPolicy& pi) {
  require_match(pi, batch);
  GradientAngles out;
  double intra_sum = 0.0;
  for (std::size_t k = 0; k < pi.k(); ++k) {
    std::vector<std::size_t> live;
    for (std::size_t i : pi.members(k))
      if (!batch.dead_mask[i]) live.push_back(i);
    if (live.size() < 2) continue;
    double s = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < live.size(); ++a)
      for (std::size_t b = a + 1; b < live.size(); ++b) {
        s += angle_deg(batch.vectors.row(live[a]), batch.vectors.row(live[b]));
        ++pairs;
      }
    intra_sum += s / static_cast<double>(pairs);
    ++out.intra_experts;
  }
  if (out.intra_experts > 0) out.intra_deg = intra_sum / static_cast<double>(out.intra_experts);

  const DenseMatrix c = centroids(pi, batch);
  std::vector<std::vector<double>> dirs;
  for (std::size_t k = 0; k < c.cols(); ++k) {
    auto col = c.col(k);
    if (norm2(col) > 0.0) dirs.push_back(std::move(col));
  }
  out.inter_experts = dirs.size();
  if (dirs.size() >= 2) {
    double s = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < dirs.size(); ++a)
      for (std::size_t b = a + 1; b < dirs.size(); ++b) {
        s += angle_deg(dirs[a], dirs[b]);
        ++pairs;
      }
    out.inter_deg = s / static_cast<double>(pairs);
  }
  return out;
}

}  // namespace badit::dog
