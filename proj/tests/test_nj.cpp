#include <set>

#include "doctest.h"
#include "phylo/distance.hpp"
#include "phylo/error.hpp"
#include "phylo/matrix.hpp"
#include "phylo/newick.hpp"
#include "phylo/nj.hpp"
#include "phylo/splits.hpp"
#include "support.hpp"

using namespace phylo;

namespace {

DistanceMatrix quartet() {
  // d(A,B) = d(C,D) = 2, all other pairs 6.
  return DistanceMatrix(SquareMatrix({"A", "B", "C", "D"}, {0, 2, 6, 6, 2, 0, 6, 6, 6, 6, 0, 2, 6, 6, 2, 0}));
}

double min_internal_edge(const PhyloTree& t) {
  const PhyloTree u = t.unrooted();
  double m = INFINITY;
  for (int v = 0; v < static_cast<int>(u.node_count()); ++v) {
    if (v != u.root() && !u.node(v).is_leaf()) m = std::min(m, u.node(v).length);
  }
  return m;
}

}  // namespace

TEST_CASE("dominant quartet") {
  const PhyloTree expected = parse_newick("((A:1,B:1):2,(C:1,D:1):2);");
  for (auto v : {nj::Variant::NJ, nj::Variant::BIONJ}) {
    const PhyloTree t = nj::build_tree(quartet(), v);
    CHECK(rf_distance(t, expected) == 0.0);
    const DistanceMatrix back = patristic_matrix(t);
    CHECK(testing::max_abs_diff(back, quartet()) < 1e-12);
  }
}

TEST_CASE("NJ output is an unrooted binary tree over the input labels with n-3 joins") {
  const PhyloTree src = testing::bd_tree(12, 4);
  nj::JoinTrace trace;
  const PhyloTree t = nj::neighbor_join(patristic_matrix(src), &trace);
  CHECK(trace.size() == 9);
  CHECK(!t.rooted());
  CHECK(t.is_binary());
  CHECK(t.node(t.root()).children.size() == 3);
  auto a = t.leaf_labels(), b = src.leaf_labels();
  CHECK(std::set<std::string>(a.begin(), a.end()) == std::set<std::string>(b.begin(), b.end()));
}

TEST_CASE("NJ and BIONJ are exact on additive matrices") {
  for (int n : {4, 5, 10, 20}) {
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
      const PhyloTree src = testing::bd_tree(n, seed);
      const DistanceMatrix d = patristic_matrix(src);
      const PhyloTree a = nj::neighbor_join(d), b = nj::bionj(d);
      CHECK(rf_distance(a, src) == 0.0);
      CHECK(rf_distance(b, src) == 0.0);
      CHECK(testing::max_abs_diff(patristic_matrix(a), d) < 1e-9);
    }
  }
}

TEST_CASE("permuting the input matrix leaves the split set unchanged") {
  Rng rng(6);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const PhyloTree src = testing::bd_tree(15, seed);
    const Alignment aln = sim::evolve_alignment(src, sim::SubstModel::jc(), 200, seed);
    const DistanceMatrix d = dist::distance_matrix(aln, dist::DistanceKind::JC);
    const auto perm = testing::random_permutation(rng, d.size());
    for (auto v : {nj::Variant::NJ, nj::Variant::BIONJ}) {
      CHECK(splits(nj::build_tree(d, v)) == splits(nj::build_tree(d.permuted(perm), v)));
    }
  }
}

TEST_CASE("exact ties are broken by label order") {
  SquareMatrix m({"a", "b", "c", "d", "e"}, 2.0);
  for (std::size_t i = 0; i < 5; ++i) m(i, i) = 0.0;
  const DistanceMatrix d(m);
  nj::JoinTrace trace;
  nj::neighbor_join(d, &trace);
  REQUIRE(!trace.empty());
  CHECK(trace[0].left == "a");
  CHECK(trace[0].right == "b");
  std::vector<std::size_t> rev{4, 3, 2, 1, 0};
  CHECK(splits(nj::neighbor_join(d)) == splits(nj::neighbor_join(d.permuted(rev))));
}

TEST_CASE("negative branch lengths are clamped") {
  const DistanceMatrix d(SquareMatrix({"a", "b", "c", "d"}, {0, 1, 5, 5, 1, 0, 5, 5, 5, 5, 0, 9, 5, 5, 9, 0}));
  const PhyloTree t = nj::neighbor_join(d);
  for (const auto& node : t.nodes()) CHECK(node.length >= 0.0);
}

TEST_CASE("perturbations inside the edge radius keep the topology") {
  Rng rng(10);
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const PhyloTree src = testing::bd_tree(10, seed);
    const DistanceMatrix d = patristic_matrix(src);
    const double radius = 0.5 * min_internal_edge(src);
    SquareMatrix m = d;
    for (std::size_t i = 0; i < d.size(); ++i)
      for (std::size_t j = i + 1; j < d.size(); ++j) {
        const double e = 0.999 * radius * (2 * rng.uniform() - 1);
        m(i, j) = m(j, i) = std::max(0.0, d(i, j) + e);
      }
    CHECK(rf_distance(nj::neighbor_join(DistanceMatrix(m)), src) == 0.0);
  }
}

TEST_CASE("three taxa and error paths") {
  const DistanceMatrix d(SquareMatrix({"a", "b", "c"}, {0, 3, 4, 3, 0, 5, 4, 5, 0}));
  const PhyloTree t = nj::neighbor_join(d);
  CHECK(t.leaf_count() == 3);
  CHECK(testing::max_abs_diff(patristic_matrix(t), d) < 1e-12);
  CHECK_THROWS_AS(nj::neighbor_join(DistanceMatrix(SquareMatrix({"a", "b"}, {0, 1, 1, 0}))), InvalidArgument);
  CHECK(nj::parse_variant("bionj") == nj::Variant::BIONJ);
  CHECK_THROWS_AS(nj::parse_variant("upgma"), InvalidArgument);
}

TEST_CASE("BIONJ and NJ agree closely on simulated JC data") {
  double nj_sum = 0.0, bionj_sum = 0.0;
  const int reps = 100;
  for (int r = 0; r < reps; ++r) {
    const PhyloTree src = testing::bd_tree(20, 500 + r);
    const Alignment a = sim::evolve_alignment(src, sim::SubstModel::jc(), 1000, 900 + r);
    const DistanceMatrix d = dist::distance_matrix(a, dist::DistanceKind::JC);
    nj_sum += rf_distance(nj::neighbor_join(d), src);
    bionj_sum += rf_distance(nj::bionj(d), src);
  }
  MESSAGE("mean RF nj " << nj_sum / reps << ", bionj " << bionj_sum / reps);
  CHECK(std::abs(nj_sum - bionj_sum) / reps < 0.02);
}
