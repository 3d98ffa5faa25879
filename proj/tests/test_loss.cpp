#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "phylo/error.hpp"
#include "phylo/loss.hpp"
#include "phylo/ops.hpp"
#include "support.hpp"

using namespace phylo;
using namespace phylo::train;

namespace {

/// Tree metrics keep exp(-D) positive definite, as the divergences require.
Tensor random_distances(Rng& rng, std::size_t n) {
  const DistanceMatrix m = patristic_matrix(testing::bd_tree(static_cast<int>(n), rng.next_u64()));
  Tensor d(Shape{n, n});
  for (std::size_t i = 0; i < n * n; ++i) d[i] = 0.3 * m.values()[i];
  return d;
}

Tensor random_spd(Rng& rng, std::size_t n) {
  const Tensor a = testing::random_tensor(rng, {n, n});
  Tensor s(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double v = i == j ? 0.5 : 0.0;
      for (std::size_t k = 0; k < n; ++k) v += a[i * n + k] * a[j * n + k];
      s[i * n + j] = v;
    }
  return s;
}

Tensor scaled(const Tensor& t, double a) {
  Tensor out = t;
  for (double& v : out.data()) v *= a;
  return out;
}

Tensor permuted(const Tensor& t, const std::vector<std::size_t>& p) {
  const std::size_t n = p.size();
  Tensor out(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = t[p[i] * n + p[j]];
  return out;
}

LossSpec spec(LossKind k) {
  LossSpec s;
  s.kind = k;
  return s;
}

const LossKind kAll[] = {LossKind::MAE, LossKind::MSE, LossKind::L21, LossKind::LogDet, LossKind::VonNeumann};

}  // namespace

TEST_CASE("losses vanish at the target and are nonnegative") {
  Rng rng(1);
  for (LossKind k : kAll) {
    for (int rep = 0; rep < 10; ++rep) {
      const Tensor a = random_distances(rng, 6), b = random_distances(rng, 6);
      CHECK(std::abs(loss_value(spec(k), a, a)) < 1e-9);
      CHECK(loss_value(spec(k), a, b) >= -1e-12);
    }
  }
}

TEST_CASE("elementwise losses over the upper triangle") {
  const Tensor a(Shape{3, 3}, std::vector<double>{0, 1, 2, 1, 0, 3, 2, 3, 0});
  const Tensor b(Shape{3, 3}, std::vector<double>{0, 2, 2, 2, 0, 1, 2, 1, 0});
  // Differences on the three pairs: 1, 0, 2.
  CHECK(loss_value(spec(LossKind::MAE), a, b) == doctest::Approx(1.0));
  CHECK(loss_value(spec(LossKind::MSE), a, b) == doctest::Approx(5.0 / 3.0));
  CHECK(loss_value(spec(LossKind::L21), a, b) == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK_THROWS_AS(loss_value(spec(LossKind::MAE), a, Tensor(Shape{2, 2})), InvalidArgument);
}

TEST_CASE("matrix divergences are invariant to common scaling and relabelling") {
  Rng rng(2);
  for (LossKind k : {LossKind::LogDet, LossKind::VonNeumann}) {
    for (int rep = 0; rep < 10; ++rep) {
      const Tensor x = random_spd(rng, 5), y = random_spd(rng, 5);
      const double base = loss_value(spec(k), x, y, false);
      const auto p = testing::random_permutation(rng, 5);
      CHECK(std::abs(loss_value(spec(k), permuted(x, p), permuted(y, p), false) - base) < 1e-8 * std::max(1.0, base));
      if (k == LossKind::LogDet) {
        for (double alpha : {0.1, 10.0}) {
          const double s = loss_value(spec(k), scaled(x, alpha), scaled(y, alpha), false);
          CHECK(std::abs(s - base) < 1e-8 * std::max(1.0, base));
        }
      } else {
        // tr(aX log aX - aX log aY - aX + aY) = a D(X||Y).
        const double s = loss_value(spec(k), scaled(x, 10.0), scaled(y, 10.0), false);
        CHECK(std::abs(s - 10.0 * base) < 1e-8 * std::max(1.0, 10.0 * base));
      }
    }
  }
}

TEST_CASE("logdet divergence against an eigen oracle") {
  Rng rng(3);
  const Tensor x = random_spd(rng, 4), y = random_spd(rng, 4);
  Eigen::MatrixXd X(4, 4), Y(4, 4);
  for (std::size_t i = 0; i < 16; ++i) {
    X(i / 4, i % 4) = x[i];
    Y(i / 4, i % 4) = y[i];
  }
  const Eigen::MatrixXd M = X * Y.inverse();
  const double oracle = M.trace() - std::log(M.determinant()) - 4.0;
  CHECK(loss_value(spec(LossKind::LogDet), x, y, false) == doctest::Approx(oracle).epsilon(1e-9));
}

TEST_CASE("loss gradients") {
  Rng rng(4);
  const Tensor target = random_distances(rng, 5);
  for (LossKind k : kAll) {
    Tensor pred = random_distances(rng, 5);
    const double err = testing::gradient_error(
        [&](ad::Tape& tape, const std::vector<ad::Var>& v) {
          // Symmetrize so the divergences see a valid matrix under perturbation.
          const ad::Var sym = ad::scale(ad::add(v[0], ad::permute(v[0], {1, 0})), 0.5);
          return tree_loss(spec(k), sym, tape.constant(target));
        },
        {pred}, 1e-5);
    CHECK_MESSAGE(err < 1e-5, to_string(k) << " error " << err);
  }
}

TEST_CASE("batch combination") {
  ad::Tape tape;
  const std::vector<ad::Var> parts{tape.constant(Tensor(Shape{1}, 2.0)), tape.constant(Tensor(Shape{1}, 4.0))};
  CHECK(batch_loss(spec(LossKind::MAE), parts).value()[0] == 3.0);
  CHECK(batch_loss(spec(LossKind::L21), parts).value()[0] == 6.0);
  CHECK_THROWS_AS(batch_loss(spec(LossKind::MSE), {}), InvalidArgument);
  CHECK(parse_loss_kind("vn") == LossKind::VonNeumann);
  CHECK_THROWS_AS(parse_loss_kind("huber"), InvalidArgument);
  LossSpec bad;
  bad.gamma = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}
