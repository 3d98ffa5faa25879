#pragma once

#include <cstdint>

#include "phylo/alignment.hpp"
#include "phylo/subst.hpp"
#include "phylo/tree.hpp"

namespace phylo::sim {

/// Birth-death process conditioned on the number of extant leaves.
struct BDParams {
  double lambda = 1.0;  ///< birth rate
  double mu = 0.5;      ///< death rate
  int n = 20;           ///< extant leaf count

  void validate() const;  ///< lambda > mu >= 0, n >= 3
};

/// Rooted, ultrametric binary tree with exactly p.n extant leaves.
///
/// Forward simulation from two crown lineages until n lineages are alive,
/// then every extant lineage is extended by one more waiting time (so pendant
/// edges are positive). Extinct lineages are pruned and unary nodes merged;
/// runs that die out entirely are resimulated. Leaves are labelled t1..tn
/// (zero padded) in random order. Deterministic in seed.
PhyloTree simulate_bd_tree(const BDParams& p, std::uint64_t seed);

/// Evolves L independent sites down the tree.
///
/// The root state is drawn from the stationary frequencies; each edge applies
/// exp(r Q b) where r is the site's rate (Gamma(shape, 1/shape) when the
/// model has a shape, else 1). Site s uses only the random stream
/// (seed, "site", s), so the output does not depend on the thread count.
/// Rows follow tree.leaves() order.
Alignment evolve_alignment(const PhyloTree& tree, const SubstModel& model, std::size_t length,
                           std::uint64_t seed);

namespace serial {
/// Single-threaded reference; bit-identical to sim::evolve_alignment.
Alignment evolve_alignment(const PhyloTree& tree, const SubstModel& model, std::size_t length,
                           std::uint64_t seed);
}  // namespace serial

/// Labels "t1".."tn", zero padded to the width of n.
std::string leaf_name(std::size_t index, std::size_t n);

}  // namespace phylo::sim
