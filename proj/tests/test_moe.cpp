#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "badit/moe.hpp"
#include "badit/random.hpp"
#include "oracles.hpp"

using namespace badit;
using namespace badit::moe;

namespace {

std::vector<double> randvec(std::size_t n, Rng& rng) {
  const DenseMatrix g = gaussian_matrix(1, n, rng);
  return {g.data().begin(), g.data().end()};
}

MoeLoraLayer random_layer(Rng& rng, GateMode mode, std::size_t m = 7, std::size_t n = 6,
                          std::size_t k = 3, std::size_t r = 2) {
  ExpertBank fresh = decompose(gaussian_matrix(m, n, rng), k, r, 2.0);
  std::vector<LoraExpert> ex = fresh.experts();
  for (auto& e : ex) {
    e.a += gaussian_matrix(m, r, rng, 0.3);
    e.b += gaussian_matrix(r, n, rng, 0.3);
  }
  const DenseMatrix alpha = uniform_matrix(1, k, rng, 0.1, 3.0);
  ExpertBank bank(fresh.residual(), ex, {alpha.data().begin(), alpha.data().end()}, 2.0);
  if (mode == GateMode::ScalarAlpha) return MoeLoraLayer(std::move(bank));
  return MoeLoraLayer(std::move(bank), gaussian_matrix(n, k, rng), 2);
}

double rel(std::span<const double> a, std::span<const double> b) {
  double d = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]), nb += b[i] * b[i];
  return std::sqrt(d / nb);
}

}  // namespace

TEST_CASE("forward of a fresh layer equals the original matrix") {
  Rng rng(1);
  const DenseMatrix w = gaussian_matrix(8, 6, rng);
  const MoeLoraLayer layer(decompose(w, 2, 2, 1.0));
  const auto x = randvec(6, rng);
  CHECK(rel(forward(layer, x), matvec(w, x)) <= 1e-10);
}

TEST_CASE("zero routing leaves the residual map") {
  Rng rng(2);
  ExpertBank bank = decompose(gaussian_matrix(5, 5, rng), 2, 2, 1.0);
  bank.routing() = {0.0, 0.0};
  const MoeLoraLayer layer(bank);
  const auto x = randvec(5, rng);
  const auto h = forward(layer, x);
  const auto ref = matvec(bank.residual(), x);
  for (std::size_t i = 0; i < 5; ++i) CHECK(h[i] == ref[i]);
}

TEST_CASE("forward equals the reconstructed dense matrix") {
  Rng rng(3);
  for (int t = 0; t < 10; ++t) {
    const MoeLoraLayer layer = random_layer(rng, GateMode::ScalarAlpha);
    const auto x = randvec(6, rng);
    CHECK(rel(forward(layer, x), matvec(reconstruct(layer.bank()), x)) <= 1e-10);
  }
  const MoeLoraLayer layer = random_layer(rng, GateMode::ScalarAlpha);
  CHECK_THROWS_AS(forward(layer, randvec(5, rng)), Error);
}

TEST_CASE("gate_weights") {
  // Router rows chosen so that logits = routerᵀ e₁ = [3, 1, 0, −1].
  ExpertBank bank(DenseMatrix(1, 2), std::vector<LoraExpert>(4, {DenseMatrix(1, 1), DenseMatrix(1, 2)}),
                  {1, 1, 1, 1}, 1.0);
  const DenseMatrix router = DenseMatrix::from_rows({{3, 1, 0, -1}, {0, 0, 0, 0}});
  const std::vector<double> e1{1.0, 0.0};
  const auto g = gate_weights(MoeLoraLayer(bank, router, 2), e1);
  CHECK(g[0] == doctest::Approx(0.8807970779778823));
  CHECK(g[1] == doctest::Approx(0.11920292202211755));
  CHECK(g[2] == 0.0);
  CHECK(g[3] == 0.0);

  const std::vector<double> zero{0.0, 0.0};
  const auto u = gate_weights(MoeLoraLayer(bank, router, 4), zero);
  for (double v : u) CHECK(v == doctest::Approx(0.25));
  const auto tie = gate_weights(MoeLoraLayer(bank, router, 1), zero);
  CHECK(tie == std::vector<double>{1.0, 0.0, 0.0, 0.0});
  const auto one = gate_weights(MoeLoraLayer(bank, router, 1), e1);
  CHECK(one == std::vector<double>{1.0, 0.0, 0.0, 0.0});

  try {
    gate_weights(MoeLoraLayer(bank), e1);
    FAIL("expected mode error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Mode);
  }
  CHECK_THROWS_AS(MoeLoraLayer(bank, router, 5), Error);
  CHECK_THROWS_AS(MoeLoraLayer(bank, DenseMatrix(3, 4), 2), Error);

  Rng rng(4);
  for (int t = 0; t < 10; ++t) {
    const MoeLoraLayer l = random_layer(rng, GateMode::InputTopK);
    const auto w = gate_weights(l, randvec(6, rng));
    double s = 0.0;
    std::size_t nz = 0;
    for (double v : w) s += v, nz += v != 0.0;
    CHECK(s == doctest::Approx(1.0));
    CHECK(nz == l.top_k());
  }
}

TEST_CASE("backward on a scalar layer matches the product rule") {
  const double a = 0.7, b = -1.3, alpha = 2.0, x = 0.4, u = 1.5;
  ExpertBank bank(DenseMatrix(1, 1), {{DenseMatrix(1, 1, a), DenseMatrix(1, 1, b)}}, {alpha}, 1.0);
  const MoeLoraLayer layer(bank);
  const std::vector<double> xs{x}, us{u};
  const LayerGradients g = backward(layer, xs, us);
  CHECK(g.grad_a[0](0, 0) == doctest::Approx(alpha * b * x * u));
  CHECK(g.grad_b[0](0, 0) == doctest::Approx(alpha * a * x * u));
  CHECK(g.grad_alpha[0] == doctest::Approx(a * b * x * u));

  const std::vector<double> zero{0.0};
  const LayerGradients z = backward(layer, xs, zero);
  CHECK(max_abs(z.grad_a[0]) == 0.0);
  CHECK(max_abs(z.grad_b[0]) == 0.0);
  CHECK(z.grad_alpha[0] == 0.0);
}

TEST_CASE("backward agrees with central finite differences in both gate modes") {
  Rng rng(5);
  for (GateMode mode : {GateMode::ScalarAlpha, GateMode::InputTopK}) {
    for (int t = 0; t < 5; ++t) {
      MoeLoraLayer layer = random_layer(rng, mode);
      const auto x = randvec(6, rng);
      const auto u = randvec(7, rng);
      const LayerGradients g = backward(layer, x, u);
      const auto loss = [&] { return dot(u, forward(layer, x)); };
      const double h = 1e-6;
      double worst = 0.0;
      const auto track = [&](double analytic, double& param) {
        const double fd = oracle::central_difference(param, h, loss);
        worst = std::max(worst, std::abs(analytic - fd) / std::max(1.0, std::abs(fd)));
      };
      for (std::size_t k = 0; k < layer.bank().k(); ++k) {
        auto& e = layer.bank().expert(k);
        for (std::size_t i = 0; i < e.a.size(); ++i) track(g.grad_a[k].data()[i], e.a.data()[i]);
        for (std::size_t i = 0; i < e.b.size(); ++i) track(g.grad_b[k].data()[i], e.b.data()[i]);
        if (mode == GateMode::ScalarAlpha) track(g.grad_alpha[k], layer.bank().routing()[k]);
      }
      if (mode == GateMode::InputTopK) {
        auto& router = *layer.router();
        for (std::size_t i = 0; i < router.size(); ++i) track(g.grad_router->data()[i], router.data()[i]);
      }
      CHECK(worst <= 1e-5);
    }
  }
}

TEST_CASE("regroup_layer preserves scalar layers and warns for gated ones") {
  Rng rng(6);
  const MoeLoraLayer layer = random_layer(rng, GateMode::ScalarAlpha);
  const dog::GroupingPolicy pi({2, 0, 1, 1, 0, 2}, 3, 2);
  const RegroupOutcome out = regroup_layer(layer, pi);
  CHECK_FALSE(out.warning.has_value());
  for (int t = 0; t < 20; ++t) {
    const auto x = randvec(6, rng);
    CHECK(rel(forward(out.layer, x), forward(layer, x)) <= 1e-10);
  }
  const RegroupOutcome gated = regroup_layer(random_layer(rng, GateMode::InputTopK), pi);
  CHECK(gated.warning.has_value());
  CHECK(gated.layer.gate_mode() == GateMode::InputTopK);
}

TEST_CASE("layer directory round trip") {
  Rng rng(7);
  const auto dir = std::filesystem::temp_directory_path() / "badit_layer_test";
  for (GateMode mode : {GateMode::ScalarAlpha, GateMode::InputTopK}) {
    std::filesystem::remove_all(dir);
    const MoeLoraLayer layer = random_layer(rng, mode);
    save_layer(layer, dir);
    const MoeLoraLayer back = load_layer(dir);
    CHECK(back.gate_mode() == mode);
    CHECK(back.bank() == layer.bank());
    CHECK(back.router() == layer.router());
    CHECK(back.top_k() == layer.top_k());
  }
  std::filesystem::remove_all(dir);
}
