#pragma once

#include <string>
#include <vector>

#include "phylo/matrix.hpp"
#include "phylo/tree.hpp"

namespace phylo::nj {

/// One agglomeration step.
struct JoinRecord {
  std::string left;   ///< cluster description, e.g. "A" or "(A,B)"
  std::string right;
  double q = 0.0;     ///< Q value of the chosen pair
  double left_length = 0.0;
  double right_length = 0.0;
};

/// n - 3 records for n input taxa.
using JoinTrace = std::vector<JoinRecord>;

enum class Variant { NJ, BIONJ };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);

/// Canonical neighbor-joining; returns an unrooted binary tree (three-child root).
///
/// Taxa are processed in sorted label order and exact Q ties go to the
/// lexicographically smallest label pair, so permuting the input matrix never
/// changes the output topology. Negative branch lengths are clamped to 0.
/// Requires at least 3 taxa.
PhyloTree neighbor_join(const DistanceMatrix& d, JoinTrace* trace = nullptr);

/// BIONJ: as neighbor_join, but the reduction step mixes the two joined rows
/// with the weight that minimizes the variance of the new distances
/// (variances initialised to the distances themselves).
PhyloTree bionj(const DistanceMatrix& d, JoinTrace* trace = nullptr);

PhyloTree build_tree(const DistanceMatrix& d, Variant v, JoinTrace* trace = nullptr);

}  // namespace phylo::nj
