#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "phylo/matrix.hpp"

namespace phylo::embed {

/// Points in R^k, one row per label.
struct Embedding {
  std::vector<std::string> labels;
  std::size_t dims = 0;
  std::vector<double> coords;                     ///< row-major n x dims
  std::vector<std::vector<std::size_t>> subsets;  ///< anchor set behind each coordinate

  double at(std::size_t point, std::size_t dim) const { return coords[point * dims + dim]; }
  /// Euclidean distances between the embedded points.
  SquareMatrix distances() const;
};

/// Random-subset (Linial-London-Rabinovich) embedding with k = floor(log2 n)
/// coordinates: coordinate i is the distance to a uniformly drawn subset of size
/// 2^i (i = 0..k-1). Deterministic in seed. Requires n >= 2.
Embedding llr_embed(const DistanceMatrix& d, std::uint64_t seed);

/// Tightest r, rho with r d1 <= d2 <= r rho d1 over all pairs.
struct DistortionReport {
  double r = 0.0;
  double rho = 1.0;  ///< infinite when d2 collapses a pair that d1 separates
  std::string expand_a, expand_b;    ///< pair with the largest d2/d1
  std::string contract_a, contract_b;  ///< pair with the smallest d2/d1
  bool injective = true;
};

/// d1 must have positive off-diagonal entries; labels must agree.
DistortionReport measure_distortion(const SquareMatrix& d1, const SquareMatrix& d2);

struct AuditOptions {
  std::size_t exhaustive_limit = 64;  ///< check all triples up to this many taxa
  bool force_exhaustive = false;
  std::size_t samples = 1000000;      ///< random triples above the limit
  double tolerance = 1e-9;
  std::uint64_t seed = 1;
};

struct MetricAudit {
  bool is_symmetric = true;
  bool zero_diagonal = true;
  bool nonnegative = true;
  bool is_dissimilarity = true;  ///< nonnegative, zero diagonal, symmetric
  std::size_t triangle_violations = 0;
  double worst_margin = 0.0;  ///< max of d(i,k) - d(i,j) - d(j,k), 0 when none positive
  std::string worst_i, worst_j, worst_k;
  std::size_t triples_checked = 0;
  bool exhaustive = true;
  bool is_metric = true;
};

MetricAudit audit_metric(const SquareMatrix& d, const AuditOptions& opts = {});

}  // namespace phylo::embed
