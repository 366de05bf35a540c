#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <numeric>

#include "badit/dog.hpp"
#include "badit/planted.hpp"
#include "badit/random.hpp"
#include "oracles.hpp"

using namespace badit;
using namespace badit::dog;

namespace {

GradientBatch unit_rows(std::initializer_list<std::initializer_list<double>> rows) {
  return normalize(DenseMatrix::from_rows(rows));
}

GroupingPolicy random_policy(std::size_t k, std::size_t r, Rng& rng) {
  std::vector<std::size_t> e(k * r);
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = i / r;
  std::shuffle(e.begin(), e.end(), rng);
  return GroupingPolicy(e, k, r);
}

double quadratic_form(const GroupingPolicy& pi, const GradientBatch& b, bool same) {
  double s = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      if ((pi.expert_of(i) == pi.expert_of(j)) == same)
        for (std::size_t d = 0; d < b.dim(); ++d) s += b.vectors(i, d) * b.vectors(j, d);
  return s;
}

}  // namespace

TEST_CASE("GroupingPolicy enforces exact capacity") {
  CHECK_NOTHROW(GroupingPolicy({0, 1, 1, 0}, 2, 2));
  try {
    GroupingPolicy({0, 0, 0, 1}, 2, 2);
    FAIL("expected constraint violation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConstraintViolation);
  }
  CHECK_THROWS_AS(GroupingPolicy({0, 2}, 2, 1), Error);
  const GroupingPolicy p({1, 0, 0, 1}, 2, 2);
  CHECK(GroupingPolicy::from_matrix(p.to_matrix(), 2) == p);
  CHECK(p.members(1) == std::vector<std::size_t>{0, 3});
  CHECK_THROWS_AS(GroupingPolicy::from_matrix(DenseMatrix::from_rows({{1, 1}, {0, 0}}), 1), Error);
}

TEST_CASE("extract_rank1_gradients concatenates columns of A with rows of B") {
  const std::vector<DenseMatrix> ga{DenseMatrix::from_rows({{1}, {0}})};
  const std::vector<DenseMatrix> gb{DenseMatrix::from_rows({{0, 2}})};
  CHECK(extract_rank1_gradients(ga, gb) == DenseMatrix::from_rows({{1, 0, 0, 2}}));
  const std::vector<DenseMatrix> za{DenseMatrix(3, 2), DenseMatrix(3, 2)};
  const std::vector<DenseMatrix> zb{DenseMatrix(2, 4), DenseMatrix(2, 4)};
  CHECK(max_abs(extract_rank1_gradients(za, zb)) == 0.0);
  const DenseMatrix g = extract_rank1_gradients(
      std::vector<DenseMatrix>{DenseMatrix::from_rows({{1, 2}}), DenseMatrix::from_rows({{3, 4}})},
      std::vector<DenseMatrix>{DenseMatrix::from_rows({{5}, {6}}), DenseMatrix::from_rows({{7}, {8}})});
  CHECK(g == DenseMatrix::from_rows({{1, 5}, {2, 6}, {3, 7}, {4, 8}}));
  CHECK_THROWS_AS(extract_rank1_gradients(za, std::vector<DenseMatrix>{DenseMatrix(3, 4)}), Error);
}

TEST_CASE("normalize") {
  const GradientBatch b = normalize(DenseMatrix::from_rows({{3, 4, 0, 0}, {0, 0, 0, 0}}), 1e-12);
  CHECK(b.vectors(0, 0) == doctest::Approx(0.6));
  CHECK(b.vectors(0, 1) == doctest::Approx(0.8));
  CHECK(b.dead_mask == std::vector<bool>{false, true});
  CHECK(b.raw_norms[0] == doctest::Approx(5.0));
  CHECK(b.live_count() == 1);
  Rng rng(1);
  const GradientBatch r = normalize(gaussian_matrix(32, 9, rng));
  for (std::size_t i = 0; i < 32; ++i) CHECK(std::abs(norm2(r.vectors.row(i)) - 1.0) <= 1e-12);
}

TEST_CASE("grouping_objective") {
  const GradientBatch ortho = unit_rows({{1, 0}, {0, 1}});
  CHECK(grouping_objective(GroupingPolicy({0, 1}, 2, 1), ortho) == doctest::Approx(2.0));
  CHECK(grouping_objective(GroupingPolicy({1, 0}, 2, 1), ortho) == doctest::Approx(2.0));
  const GradientBatch same = unit_rows({{1, 0}, {1, 0}});
  CHECK(grouping_objective(GroupingPolicy({0, 0}, 1, 2), same) == doctest::Approx(4.0));
  Rng rng(7);
  for (int t = 0; t < 20; ++t) {
    const GradientBatch b = normalize(gaussian_matrix(12, 5, rng));
    const GroupingPolicy pi = random_policy(3, 4, rng);
    CHECK(std::abs(grouping_objective(pi, b) - quadratic_form(pi, b, true)) <= 1e-10);
  }
}

TEST_CASE("objective_split") {
  const GradientBatch ortho = unit_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  CHECK(std::abs(objective_split(GroupingPolicy({0, 1, 2}, 3, 1), ortho).inter) <= 1e-15);
  const GradientBatch same = unit_rows({{1, 0}, {1, 0}});
  const ObjectiveSplit s = objective_split(GroupingPolicy({0, 1}, 2, 1), same);
  CHECK(s.intra == doctest::Approx(2.0));
  CHECK(s.inter == doctest::Approx(2.0));
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    const GradientBatch b = normalize(gaussian_matrix(8, 6, rng));
    const GroupingPolicy pi = random_policy(4, 2, rng);
    const ObjectiveSplit sp = objective_split(pi, b);
    CHECK(std::abs(sp.intra - quadratic_form(pi, b, true)) <= 1e-10);
    CHECK(std::abs(sp.inter - quadratic_form(pi, b, false)) <= 1e-10);
  }
}

TEST_CASE("spherical_kmeans_init separates bundles and handles degenerate input") {
  const GradientBatch two = unit_rows({{1, 0.01, 0}, {0, 1, 0.02}, {1, -0.02, 0}, {0.01, 1, 0}});
  const ClusterLabels l = spherical_kmeans_init(two, 2, 3);
  CHECK(*l.label[0] == *l.label[2]);
  CHECK(*l.label[1] == *l.label[3]);
  CHECK(*l.label[0] != *l.label[1]);

  const GradientBatch same = unit_rows({{1, 0}, {1, 0}, {1, 0}, {1, 0}});
  const ClusterLabels d = spherical_kmeans_init(same, 2, 0);
  CHECK(d.rounds <= 50);
  std::set<std::size_t> used;
  for (auto& v : d.label) used.insert(*v);
  CHECK(used.size() == 2);

  const PlantedBundles pb = planted_bundles(4, 4, 24, 0.05, 99);
  const ClusterLabels p = spherical_kmeans_init(normalize(pb.raw), 4, 99);
  std::vector<std::size_t> got;
  for (auto& v : p.label) got.push_back(*v);
  CHECK(oracle::adjusted_rand_index(got, pb.labels) == doctest::Approx(1.0));

  try {
    spherical_kmeans_init(normalize(DenseMatrix::from_rows({{1, 0}, {0, 0}})), 2, 0);
    FAIL("expected degenerate input");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateInput);
  }
}

TEST_CASE("centroids are unnormalized member sums") {
  const GradientBatch b = unit_rows({{1, 0}, {0, 1}});
  CHECK(centroids(GroupingPolicy({0, 1}, 2, 1), b) == DenseMatrix::identity(2));
  const DenseMatrix c = centroids(GroupingPolicy({0, 0}, 1, 2), b);
  CHECK(norm2(c.col(0)) == doctest::Approx(std::sqrt(2.0)));
  Rng rng(4);
  const GradientBatch r = normalize(gaussian_matrix(6, 4, rng));
  const GroupingPolicy pi = random_policy(3, 2, rng);
  const DenseMatrix cr = centroids(pi, r);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t d = 0; d < 4; ++d) {
      double s = 0.0;
      for (std::size_t i = 0; i < 6; ++i) s += pi.to_matrix()(i, k) * r.vectors(i, d);
      CHECK(std::abs(cr(d, k) - s) <= 1e-12);
    }
}

TEST_CASE("orthogonalize_centroids is the Procrustes / polar factor") {
  Rng rng(5);
  const DenseMatrix q0 = random_orthonormal(7, 3, rng);
  CHECK(max_abs(orthogonalize_centroids(q0) - q0) <= 1e-10);

  const DenseMatrix c = DenseMatrix::from_rows({{5, 0}, {0, 3}, {0, 0}, {0, 0}});
  CHECK(max_abs(orthogonalize_centroids(c) - DenseMatrix::from_rows({{1, 0}, {0, 1}, {0, 0}, {0, 0}})) <= 1e-10);

  for (int t = 0; t < 10; ++t) {
    const DenseMatrix rc = gaussian_matrix(9, 4, rng);
    const DenseMatrix q = orthogonalize_centroids(rc);
    CHECK(orthonormality_defect(q) <= 1e-10);
    CHECK(max_abs(q - oracle::polar_factor(rc)) <= 1e-9);
  }

  // Sampled optimality: no nearby orthonormal matrix is closer to C.
  const DenseMatrix rc = gaussian_matrix(8, 3, rng);
  const DenseMatrix q = orthogonalize_centroids(rc);
  const double best = frobenius_norm(rc - q);
  for (int t = 0; t < 1000; ++t) {
    const DenseMatrix skew = gaussian_matrix(8, 8, rng, 0.05);
    const DenseMatrix a = skew - skew.transpose();
    // Cayley transform of a skew matrix is orthogonal.
    const Eigen::MatrixXd ea = oracle::to_eigen(a);
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(8, 8);
    const DenseMatrix rot = oracle::from_eigen((id - ea).inverse() * (id + ea));
    const DenseMatrix qt = matmul(rot, q);
    CHECK(best <= frobenius_norm(rc - qt) + 1e-12);
  }

  DenseMatrix deficient(6, 3);
  deficient(0, 0) = 1.0;
  deficient(0, 1) = 1.0;
  CHECK(orthonormality_defect(orthogonalize_centroids(deficient)) <= 1e-10);
  CHECK_THROWS_AS(orthogonalize_centroids(DenseMatrix(2, 3)), Error);
}

TEST_CASE("assign_step basics") {
  const GradientBatch b = unit_rows({{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}});
  const DenseMatrix q = DenseMatrix::identity(4);
  const GroupingPolicy pi = assign_step(b, q, 1);
  CHECK(pi == GroupingPolicy::identity(4, 1));
  CHECK(assignment_score(pi, b, q) == doctest::Approx(4.0));
  try {
    assign_step(b, q, 2);
    FAIL("expected constraint violation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConstraintViolation);
  }
}

TEST_CASE("assign_step exact mode matches brute force; greedy never beats it") {
  Rng rng(31);
  for (auto [k, r] : {std::pair{2, 2}, {2, 3}, {3, 2}, {2, 4}, {4, 2}}) {
    for (int t = 0; t < 10; ++t) {
      const GradientBatch b = normalize(gaussian_matrix(k * r, 6, rng));
      const DenseMatrix q = random_orthonormal(6, k, rng);
      const DenseMatrix sim = matmul(b.vectors, q);
      double best = -1e300;
      oracle::balanced_assignments(k, r, [&](const std::vector<std::size_t>& lab) {
        double s = 0.0;
        for (std::size_t i = 0; i < lab.size(); ++i) s += sim(i, lab[i]);
        best = std::max(best, s);
      });
      const double exact = assignment_score(assign_step(b, q, r, AssignMode::Exact), b, q);
      const double greedy = assignment_score(assign_step(b, q, r, AssignMode::Greedy), b, q);
      CHECK(std::abs(exact - best) <= 1e-12);
      CHECK(greedy <= exact + 1e-12);
    }
  }
}

TEST_CASE("greedy is strictly worse on the adversarial construction") {
  const AdversarialCase c = greedy_adversarial();
  const GradientBatch b = normalize(c.raw);
  const double exact = assignment_score(assign_step(b, c.q, 1, AssignMode::Exact), b, c.q);
  const double greedy = assignment_score(assign_step(b, c.q, 1, AssignMode::Greedy), b, c.q);
  CHECK(exact == doctest::Approx(0.8));
  CHECK(greedy == doctest::Approx(0.4));
}

TEST_CASE("dead components fill the lowest experts with room") {
  const GradientBatch b = normalize(DenseMatrix::from_rows({{0, 0}, {0, 1}, {0, 0}, {1, 0}}));
  const GroupingPolicy pi = assign_step(b, DenseMatrix::identity(2), 2);
  CHECK(pi.expert_of(1) == 1);
  CHECK(pi.expert_of(3) == 0);
  CHECK(pi.expert_of(0) == 0);
  CHECK(pi.expert_of(2) == 1);
}

TEST_CASE("dog_run recovers planted bundles") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const PlantedBundles pb = planted_bundles(4, 4, 32, 0.02, seed);
    const DogResult res = dog_run(normalize(pb.raw), 4, 4, {10, AssignMode::Exact, seed});
    CHECK(oracle::adjusted_rand_index(res.policy.assignment(), pb.labels) == doctest::Approx(1.0));
    CHECK(res.iterations <= 10);
    CHECK(res.objective_trace.size() == res.iterations + 1);
  }
}

TEST_CASE("dog_run from an optimal start stops after one loop") {
  const PlantedBundles pb = planted_bundles(4, 4, 32, 0.02, 3, false);
  const DogResult res = dog_run(normalize(pb.raw), 4, 4, {}, GroupingPolicy::identity(4, 4));
  CHECK(res.iterations == 1);
  CHECK(res.converged);
  CHECK(res.policy == GroupingPolicy::identity(4, 4));
}

TEST_CASE("dog_run optimality floor on small random instances") {
  int optimal = 0;
  int total = 0;
  Rng rng(77);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const std::size_t k = seed % 2 == 0 ? 2 : 4;
    const std::size_t r = 8 / k;
    const GradientBatch b = normalize(gaussian_matrix(k * r, 6, rng));
    double best = 0.0;
    oracle::balanced_assignments(k, r, [&](const std::vector<std::size_t>& lab) {
      best = std::max(best, grouping_objective(GroupingPolicy(lab, k, r), b));
    });
    const DogResult res = dog_run(b, k, r, {10, AssignMode::Exact, seed});
    const double got = grouping_objective(res.policy, b);
    CHECK(got >= 0.95 * best);
    optimal += std::abs(got - best) <= 1e-9;
    ++total;
  }
  MESSAGE("dog_run optimal in " << optimal << " / " << total);
  CHECK(optimal >= 80);
}

TEST_CASE("dog_run with fewer live components than experts warns and stays feasible") {
  const DogResult res = dog_run(normalize(DenseMatrix(8, 5)), 4, 2, {});
  CHECK_FALSE(res.warnings.empty());
  CHECK(res.policy == GroupingPolicy::identity(4, 2));
}

TEST_CASE("regroup: identity is bit-identical, uniform routing preserves reconstruct") {
  Rng rng(6);
  const ExpertBank bank = decompose(gaussian_matrix(10, 9, rng), 3, 2, 1.5);
  CHECK(regroup(bank, GroupingPolicy::identity(3, 2)) == bank);
  for (int t = 0; t < 10; ++t) {
    const ExpertBank moved = regroup(bank, random_policy(3, 2, rng));
    CHECK(max_abs(reconstruct(moved) - reconstruct(bank)) <= 1e-12);
    CHECK(moved.routing() == bank.routing());
    CHECK(moved.residual_checksum() == bank.residual_checksum());
  }
}

TEST_CASE("regroup with heterogeneous routing preserves the layer map") {
  Rng rng(12);
  ExpertBank bank = decompose(gaussian_matrix(6, 6, rng), 2, 2, 1.0);
  bank.routing() = {2.0, 0.5};
  const GroupingPolicy swap({0, 1, 1, 0}, 2, 2);
  const ExpertBank moved = regroup(bank, swap);
  const DenseMatrix before = reconstruct(bank), after = reconstruct(moved);
  for (int t = 0; t < 20; ++t) {
    const DenseMatrix x = gaussian_matrix(6, 1, rng);
    const DenseMatrix hb = matmul(before, x), ha = matmul(after, x);
    CHECK(frobenius_norm(ha - hb) / frobenius_norm(hb) <= 1e-10);
  }
  // Expert 0 now holds components 0 and 3; component 3 came from expert 1 and
  // its A-column carries α_1 / α_0.
  CHECK(max_abs(DenseMatrix::from_columns({moved.expert(0).a.col(1)}) -
                0.25 * DenseMatrix::from_columns({bank.expert(1).a.col(1)})) <= 1e-15);
  CHECK(moved.expert(0).b.row(1)[0] == bank.expert(1).b.row(1)[0]);
}

TEST_CASE("regroup refuses a near-zero destination weight") {
  Rng rng(1);
  ExpertBank bank = decompose(gaussian_matrix(4, 4, rng), 2, 1, 1.0);
  bank.routing() = {1.0, 0.0};
  try {
    regroup(bank, GroupingPolicy({1, 0}, 2, 1));
    FAIL("expected division hazard");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DivisionHazard);
  }
  CHECK_NOTHROW(regroup(bank, GroupingPolicy({1, 0}, 2, 1), {.rescale = false}));
}

TEST_CASE("gradient_angles") {
  const GradientBatch b = unit_rows({{1, 0}, {1, 0}, {0, 1}, {0, 1}});
  const GradientAngles a = gradient_angles(b, GroupingPolicy({0, 0, 1, 1}, 2, 2));
  CHECK(*a.intra_deg == doctest::Approx(0.0));
  CHECK(*a.inter_deg == doctest::Approx(90.0));

  const GradientBatch c = unit_rows({{1, 0}, {1, 1}});
  const GradientAngles ac = gradient_angles(c, GroupingPolicy({0, 1}, 2, 1));
  CHECK(*ac.inter_deg == doctest::Approx(45.0));
  CHECK_FALSE(ac.intra_deg.has_value());
  CHECK(ac.intra_experts == 0);

  Rng rng(9);
  const GradientBatch r = normalize(gaussian_matrix(9, 5, rng));
  const GroupingPolicy pi = random_policy(3, 3, rng);
  const GradientAngles ar = gradient_angles(r, pi);
  const auto deg = [](std::span<const double> x, std::span<const double> y) {
    double d = 0, nx = 0, ny = 0;
    for (std::size_t i = 0; i < x.size(); ++i) d += x[i] * y[i], nx += x[i] * x[i], ny += y[i] * y[i];
    return std::acos(d / std::sqrt(nx * ny)) * 180.0 / M_PI;
  };
  double intra = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    const auto m = pi.members(k);
    intra += (deg(r.vectors.row(m[0]), r.vectors.row(m[1])) + deg(r.vectors.row(m[0]), r.vectors.row(m[2])) +
              deg(r.vectors.row(m[1]), r.vectors.row(m[2]))) / 3.0;
  }
  CHECK(std::abs(*ar.intra_deg - intra / 3.0) <= 1e-9);
  const DenseMatrix c3 = centroids(pi, r);
  const double inter = (deg(c3.col(0), c3.col(1)) + deg(c3.col(0), c3.col(2)) + deg(c3.col(1), c3.col(2))) / 3.0;
  CHECK(std::abs(*ar.inter_deg - inter) <= 1e-9);
}
