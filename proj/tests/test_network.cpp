#include <Eigen/Dense>
#include <cmath>
#include <set>

#include "doctest.h"
#include "phylo/embed.hpp"
#include "phylo/error.hpp"
#include "phylo/network.hpp"
#include "phylo/simulate.hpp"
#include "support.hpp"

using namespace phylo;
using namespace phylo::net;

namespace {

NetworkSpec small_spec(Architecture a, Head h = Head::PairScalar) {
  NetworkSpec s;
  s.architecture = a;
  s.head = is_pair_network(a) ? Head::PairScalar : h;
  s.channels = 4;
  s.heads = 2;
  s.embedding = 3;
  s.scalar_hidden = 4;
  s.taxa = 5;
  return s;
}

/// Rows of a one-hot [n,L,4] tensor reordered (axis 0) or sites reordered (axis 1).
Tensor reorder(const Tensor& x, std::size_t axis, const std::vector<std::size_t>& perm) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.dim(0); ++i)
    for (std::size_t s = 0; s < x.dim(1); ++s)
      for (std::size_t c = 0; c < 4; ++c)
        out.at({i, s, c}) = x.at({axis == 0 ? perm[i] : i, axis == 1 ? perm[s] : s, c});
  return out;
}

Tensor random_one_hot(Rng& rng, std::size_t n, std::size_t L) {
  Tensor x(Shape{n, L, 4});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t s = 0; s < L; ++s) x.at({i, s, rng.index(4)}) = 1.0;
  return x;
}

std::vector<NetworkSpec> all_learned_specs() {
  std::vector<NetworkSpec> out;
  for (Architecture a : learned_architectures()) {
    if (is_pair_network(a)) {
      out.push_back(small_spec(a));
    } else {
      out.push_back(small_spec(a, Head::EuclideanDistance));
      out.push_back(small_spec(a, Head::InnerProduct));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("architecture names and layer counts") {
  CHECK(learned_architectures().size() == 6);
  for (Architecture a : learned_architectures()) CHECK(parse_architecture(to_string(a)) == a);
  CHECK_THROWS_AS(parse_architecture("Transformer"), InvalidArgument);
  CHECK(parse_head("inner") == Head::InnerProduct);
  CHECK_THROWS_AS(parse_head("cosine"), InvalidArgument);

  auto count = [](Architecture a) {
    const Network n(small_spec(a, Head::EuclideanDistance), 1);
    const auto& l = n.layers();
    return std::pair<std::size_t, std::size_t>{l.sets.size() + l.pre.size(), l.post.size()};
  };
  CHECK(count(Architecture::SitesInvariantS) == std::pair<std::size_t, std::size_t>{2, 0});
  CHECK(count(Architecture::FullInvariantS) == std::pair<std::size_t, std::size_t>{2, 0});
  CHECK(count(Architecture::FullAttentionS) == std::pair<std::size_t, std::size_t>{6, 0});
  CHECK(count(Architecture::SitesAttentionP) == std::pair<std::size_t, std::size_t>{0, 6});
  CHECK(count(Architecture::HybridAttentionSP) == std::pair<std::size_t, std::size_t>{3, 3});
  CHECK(count(Architecture::FullAttentionSP) == std::pair<std::size_t, std::size_t>{3, 3});
}

TEST_CASE("spec resolution") {
  NetworkSpec s;
  s.architecture = Architecture::FullAttentionS;
  s.head = Head::PairScalar;
  s.taxa = 20;
  s.resolve();
  CHECK(s.head == Head::EuclideanDistance);
  CHECK(s.embedding == 20);
  NetworkSpec p = small_spec(Architecture::SitesAttentionP);
  p.head = Head::InnerProduct;
  CHECK_THROWS_AS(p.resolve(), InvalidArgument);
  NetworkSpec h = small_spec(Architecture::SitesAttentionP);
  h.heads = 3;
  CHECK_THROWS_AS(h.resolve(), InvalidArgument);
  NetworkSpec r;
  r.architecture = Architecture::ReferenceJC;
  CHECK_THROWS_AS(r.resolve(), InvalidArgument);
}

TEST_CASE("same seed builds identical parameters") {
  const NetworkSpec s = small_spec(Architecture::HybridAttentionSP);
  const Network a(s, 7), b(s, 7), c(s, 8);
  bool differs = false;
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    CHECK(a.params().value(i) == b.params().value(i));
    differs = differs || !(a.params().value(i) == c.params().value(i));
  }
  CHECK(differs);
}

TEST_CASE("every architecture is equivariant to taxa permutations") {
  Rng rng(1);
  for (const NetworkSpec& spec : all_learned_specs()) {
    const Network net(spec, 3);
    for (int rep = 0; rep < 5; ++rep) {
      const std::size_t n = 5, L = 6;
      const Tensor x = random_one_hot(rng, n, L);
      const auto perm = testing::random_permutation(rng, n);
      const Tensor d = net.predict_tensor(x);
      const Tensor dp = net.predict_tensor(reorder(x, 0, perm));
      double worst = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          worst = std::max(worst, std::abs(dp[i * n + j] - d[perm[i] * n + perm[j]]));
      CHECK_MESSAGE(worst < 1e-9, to_string(spec.architecture) << "/" << to_string(spec.head));
    }
  }
}

TEST_CASE("outputs do not depend on site order") {
  Rng rng(2);
  for (const NetworkSpec& spec : all_learned_specs()) {
    const Network net(spec, 4);
    const Tensor x = random_one_hot(rng, 4, 7);
    const auto perm = testing::random_permutation(rng, 7);
    const Tensor a = net.predict_tensor(x), b = net.predict_tensor(reorder(x, 1, perm));
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-9);
  }
}

TEST_CASE("predictions are symmetric with zero diagonal and follow input labels") {
  Rng rng(3);
  const Alignment a = sim::evolve_alignment(testing::bd_tree(6, 2), sim::SubstModel::jc(), 12, 3);
  for (const NetworkSpec& spec : all_learned_specs()) {
    const Network net(spec, 5);
    const DistanceMatrix d = net.predict(a);
    CHECK(d.labels() == a.labels());
    const auto perm = testing::random_permutation(rng, a.taxa());
    const DistanceMatrix dp = net.predict(a.permuted_rows(perm));
    CHECK(testing::max_abs_diff(d, dp) == 0.0);
  }
}

TEST_CASE("euclidean heads give metrics and collapse duplicates; inner heads give PSD grams") {
  Rng rng(4);
  Tensor x = random_one_hot(rng, 6, 8);
  for (std::size_t s = 0; s < 8; ++s)
    for (std::size_t c = 0; c < 4; ++c) x.at({5, s, c}) = x.at({0, s, c});
  for (Architecture arch : {Architecture::SitesInvariantS, Architecture::FullInvariantS, Architecture::FullAttentionS}) {
    const Network sd(small_spec(arch, Head::EuclideanDistance), 6);
    const Tensor d = sd.predict_tensor(x);
    CHECK(d[0 * 6 + 5] == 0.0);
    std::vector<std::string> labels{"a", "b", "c", "d", "e", "f"};
    const SquareMatrix m(labels, std::vector<double>(d.data().begin(), d.data().end()));
    CHECK(embed::audit_metric(m).is_metric);

    const Network sc(small_spec(arch, Head::InnerProduct), 6);
    ad::Tape tape;
    const Bound p = sc.params().bind(tape, false);
    const auto out = sc.forward(p, tape.constant(x));
    const Tensor& g = out.gram.value();
    Eigen::MatrixXd gm(6, 6);
    for (std::size_t i = 0; i < 36; ++i) gm(i / 6, i % 6) = g[i];
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gm).eigenvalues().minCoeff() >= -1e-8);
  }
}

TEST_CASE("pair networks give nonnegative outputs") {
  Rng rng(5);
  const Tensor x = random_one_hot(rng, 5, 6);
  for (Architecture a : {Architecture::SitesAttentionP, Architecture::HybridAttentionSP, Architecture::FullAttentionSP}) {
    const Tensor d = Network(small_spec(a), 2).predict_tensor(x);
    for (double v : d.data()) CHECK(v >= 0.0);
  }
}

TEST_CASE("gradients of every full architecture") {
  Rng rng(6);
  const Tensor x = random_one_hot(rng, 4, 5);
  Rng trng(7);
  const Tensor target = testing::random_tensor(trng, {4, 4});
  for (const NetworkSpec& spec : all_learned_specs()) {
    Network net(spec, 8);
    // Give the zero-initialized pooling weights random values too.
    for (std::size_t i = 0; i < net.params().size(); ++i)
      for (double& v : net.params().value(i).data()) v += 0.1 * rng.normal();
    std::vector<Tensor> params;
    for (std::size_t i = 0; i < net.params().size(); ++i) params.push_back(net.params().value(i));
    const double err = testing::gradient_error(
        [&](ad::Tape& tape, const std::vector<Var>& v) {
          const Var m = net.forward(v, tape.constant(x)).matrix;
          return ad::sum(ad::mul(m, tape.constant(target)));
        },
        params);
    CHECK_MESSAGE(err < 1e-4, to_string(spec.architecture) << "/" << to_string(spec.head) << " error " << err);
  }
}

TEST_CASE("site pattern compression") {
  const Alignment a = sim::evolve_alignment(testing::bd_tree(5, 3), sim::SubstModel::jc(), 60, 4);
  Network net(small_spec(Architecture::SitesAttentionP), 9);
  CHECK(site_pattern_compression(net, a) == 1.0);
  for (std::size_t i = 0; i < net.params().size(); ++i) net.params().value(i).fill(0.0);
  std::set<std::string> patterns;
  for (std::size_t s = 0; s < a.length(); ++s) {
    std::string col;
    for (std::size_t t = 0; t < a.taxa(); ++t) col += static_cast<char>('0' + a.state(t, s));
    patterns.insert(col);
  }
  CHECK(site_pattern_compression(net, a) == doctest::Approx(1.0 / patterns.size()));
}

TEST_CASE("describe lists the resolved configuration") {
  const Network net(small_spec(Architecture::HybridAttentionSP), 1);
  const std::string d = net.describe();
  CHECK(d.find("architecture=HybridAttentionSP") != std::string::npos);
  CHECK(d.find("parameters=" + std::to_string(net.parameter_count())) != std::string::npos);
}

TEST_CASE("bad inputs are rejected") {
  const Network net(small_spec(Architecture::SitesAttentionP), 1);
  CHECK_THROWS_AS(net.predict_tensor(Tensor(Shape{3, 4, 5})), InvalidArgument);
  CHECK_THROWS_AS(net.predict_tensor(Tensor(Shape{1, 4, 4})), InvalidArgument);
}
