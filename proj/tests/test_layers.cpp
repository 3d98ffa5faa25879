#include <cmath>

#include "doctest.h"
#include "phylo/error.hpp"
#include "phylo/layers.hpp"
#include "support.hpp"

using namespace phylo;
using namespace phylo::net;
using testing::random_tensor;

namespace {

constexpr double kTol = 1e-4;

/// Gradient check over a layer's input and every parameter it owns.
double layer_error(const ParamSet& ps, const std::function<Var(const Bound&, Var)>& apply, const Tensor& x,
                   std::uint64_t seed = 3) {
  std::vector<Tensor> inputs{x};
  for (std::size_t i = 0; i < ps.size(); ++i) inputs.push_back(ps.value(i));
  return testing::gradient_error(
      [&](ad::Tape& tape, const std::vector<Var>& v) {
        const Bound bound(v.begin() + 1, v.end());
        const Var y = apply(bound, v[0]);
        Rng rng(seed, 5);
        return ad::sum(ad::mul(y, tape.constant(random_tensor(rng, y.shape()))));
      },
      inputs);
}

/// Randomizes every parameter, including ones initialized to zero.
void scramble(ParamSet& ps, Rng& rng, double scale = 0.5) {
  for (std::size_t i = 0; i < ps.size(); ++i)
    for (double& v : ps.value(i).data()) v = scale * rng.normal();
}

Tensor forward(const ParamSet& ps, const std::function<Var(const Bound&, Var)>& apply, const Tensor& x) {
  ad::Tape tape;
  const Bound b = ps.bind(tape, false);
  return apply(b, tape.constant(x)).value();
}

/// Applies a permutation to axis `axis` of a rank-3 tensor.
Tensor permute_axis(const Tensor& t, std::size_t axis, const std::vector<std::size_t>& perm) {
  Tensor out(t.shape());
  const auto& s = t.shape();
  for (std::size_t a = 0; a < s[0]; ++a)
    for (std::size_t b = 0; b < s[1]; ++b)
      for (std::size_t c = 0; c < s[2]; ++c) {
        const std::size_t src_a = axis == 0 ? perm[a] : a, src_b = axis == 1 ? perm[b] : b;
        out.at({a, b, c}) = t.at({src_a, src_b, c});
      }
  return out;
}

}  // namespace

TEST_CASE("parameter sets") {
  ParamSet ps;
  ps.add("a", Tensor(Shape{2, 3}));
  ps.add("b", Tensor(Shape{4}));
  CHECK(ps.scalar_count() == 10);
  CHECK(ps.find("b") == std::size_t{1});
  CHECK(!ps.find("c"));
  CHECK_THROWS_AS(ps.add("a", Tensor(Shape{1})), InvalidArgument);
  CHECK_THROWS_AS(ps.value("c"), InvalidArgument);
}

TEST_CASE("weight init has the requested scale") {
  Rng rng(1);
  const Tensor w = init_weights(rng, 100, 200, 2.0);
  double s2 = 0.0;
  for (double v : w.data()) s2 += v * v;
  CHECK(std::sqrt(s2 / w.size()) == doctest::Approx(0.2).epsilon(0.05));
}

TEST_CASE("layer gradients") {
  Rng rng(2);
  {
    ParamSet ps;
    const auto conv = ChannelConv::make(ps, rng, "c", 3, 4);
    scramble(ps, rng);
    CHECK(layer_error(ps, [&](const Bound& p, Var x) { return conv.apply(p, x); }, random_tensor(rng, {2, 5, 3})) <
          kTol);
  }
  {
    ParamSet ps;
    const auto eq = EquivariantPairLayer::make(ps, rng, "e", 2, Activation::ELU);
    scramble(ps, rng);
    CHECK(layer_error(ps, [&](const Bound& p, Var x) { return eq.apply(p, x); }, random_tensor(rng, {3, 2, 4, 2})) <
          kTol);
  }
  {
    ParamSet ps;
    const auto inv = InvariantPairLayer::make(ps, "i", 0.3, -0.2);
    CHECK(layer_error(ps, [&](const Bound& p, Var x) { return inv.apply(p, x); }, random_tensor(rng, {3, 2, 4, 2})) <
          kTol);
  }
  for (bool across : {false, true}) {
    ParamSet ps;
    const auto set = SiteSetLayer::make(ps, rng, "s", 3, 4, across);
    scramble(ps, rng);
    CHECK(layer_error(ps, [&](const Bound& p, Var x) { return set.apply(p, x); }, random_tensor(rng, {3, 5, 3})) <
          kTol);
  }
  for (std::size_t axis : {0, 1}) {
    ParamSet ps;
    const auto att = AttentionBlock::make(ps, rng, "a", 4, 2);
    CHECK(layer_error(ps, [&](const Bound& p, Var x) { return att.apply(p, x, axis); }, random_tensor(rng, {3, 5, 4})) <
          kTol);
  }
  {
    ParamSet ps;
    const auto mlp = ChannelMLP::make(ps, rng, "m", 4, 6);
    scramble(ps, rng);
    CHECK(layer_error(ps, [&](const Bound& p, Var x) { return mlp.apply(p, x); }, random_tensor(rng, {2, 3, 4})) <
          kTol);
  }
  for (bool across : {false, true}) {
    ParamSet ps;
    const auto layer = AttentionLayer::make(ps, rng, "l", 4, 2, across);
    scramble(ps, rng);
    CHECK(layer_error(ps, [&](const Bound& p, Var x) { return layer.apply(p, x); }, random_tensor(rng, {3, 4, 4})) <
          kTol);
  }
  for (bool soft : {false, true}) {
    ParamSet ps;
    const auto g = ScalarMLP::make(ps, rng, "g", {3, 5, 5, 1}, Activation::ELU, soft);
    CHECK(layer_error(ps, [&](const Bound& p, Var x) { return g.apply(p, x); }, random_tensor(rng, {6, 3})) < kTol);
  }
  {
    ParamSet ps;
    const auto pf = PairFormation::make(ps, rng, "p", 3, 2, 4);
    scramble(ps, rng);
    CHECK(layer_error(ps, [&](const Bound& p, Var x) { return pf.apply(p, x); }, random_tensor(rng, {4, 3, 3})) <
          kTol);
  }
}

TEST_CASE("attention with zero values is the identity") {
  Rng rng(3);
  ParamSet ps;
  const auto att = AttentionBlock::make(ps, rng, "a", 8, 4);
  ps.value(att.wv).fill(0.0);
  const Tensor x = random_tensor(rng, {2, 6, 8});
  CHECK(forward(ps, [&](const Bound& p, Var v) { return att.apply(p, v, 1); }, x) == x);
}

TEST_CASE("attention over a single item adds the value projection") {
  Rng rng(4);
  ParamSet ps;
  const auto att = AttentionBlock::make(ps, rng, "a", 4, 2);
  const Tensor x = random_tensor(rng, {3, 1, 4});
  const Tensor y = forward(ps, [&](const Bound& p, Var v) { return att.apply(p, v, 1); }, x);
  const Tensor& wv = ps.value(att.wv);
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t c = 0; c < 4; ++c) {
      double v = x.at({b, 0, c});
      for (std::size_t k = 0; k < 4; ++k) v += x.at({b, 0, k}) * wv[k * 4 + c];
      CHECK(y.at({b, 0, c}) == doctest::Approx(v).epsilon(1e-14));
    }
}

TEST_CASE("attention weights are row-stochastic and heads must divide the width") {
  Rng rng(5);
  ParamSet ps;
  const auto att = AttentionBlock::make(ps, rng, "a", 6, 3);
  scramble(ps, rng, 2.0);
  ad::Tape tape;
  const Bound b = ps.bind(tape, false);
  Var w;
  att.apply(b, tape.constant(random_tensor(rng, {2, 7, 6})), 1, &w);
  REQUIRE(w.shape() == Shape{6, 7, 7});
  for (std::size_t r = 0; r < 6 * 7; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 7; ++c) s += w.value()[r * 7 + c];
    CHECK(std::abs(s - 1.0) < 1e-9);
  }
  ParamSet other;
  CHECK_THROWS_AS(AttentionBlock::make(other, rng, "bad", 6, 4), InvalidArgument);
}

TEST_CASE("attention is equivariant along its axis") {
  Rng rng(6);
  ParamSet ps;
  const auto att = AttentionBlock::make(ps, rng, "a", 4, 2);
  for (std::size_t axis : {0, 1}) {
    for (int rep = 0; rep < 10; ++rep) {
      const Tensor x = random_tensor(rng, {5, 6, 4});
      const auto perm = testing::random_permutation(rng, axis == 0 ? 5 : 6);
      auto f = [&](const Bound& p, Var v) { return att.apply(p, v, axis); };
      const Tensor a = forward(ps, f, permute_axis(x, axis, perm));
      const Tensor b = permute_axis(forward(ps, f, x), axis, perm);
      for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-12);
    }
  }
}

TEST_CASE("site set layers are equivariant over sites and rows") {
  Rng rng(7);
  ParamSet ps;
  const auto set = SiteSetLayer::make(ps, rng, "s", 3, 3, true);
  scramble(ps, rng);
  auto f = [&](const Bound& p, Var v) { return set.apply(p, v); };
  for (std::size_t axis : {0, 1}) {
    const Tensor x = random_tensor(rng, {4, 6, 3});
    const auto perm = testing::random_permutation(rng, axis == 0 ? 4 : 6);
    const Tensor a = forward(ps, f, permute_axis(x, axis, perm));
    const Tensor b = permute_axis(forward(ps, f, x), axis, perm);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-12);
  }
}

TEST_CASE("pair formation ignores the order within a pair") {
  Rng rng(8);
  ParamSet ps;
  const auto pf = PairFormation::make(ps, rng, "p", 3, 2, 4);
  scramble(ps, rng);
  const Tensor x = random_tensor(rng, {2, 5, 3});
  const Tensor swapped = permute_axis(x, 0, {1, 0});
  auto f = [&](const Bound& p, Var v) { return pf.apply(p, v); };
  const Tensor a = forward(ps, f, x), b = forward(ps, f, swapped);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-12);
  CHECK(pair_indices(4).size() == 6);
  CHECK(pair_indices(4)[3] == std::pair<std::size_t, std::size_t>{1, 2});
}
