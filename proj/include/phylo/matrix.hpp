#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "phylo/tree.hpp"

namespace phylo {

/// Labelled n x n matrix, row-major, with no invariants beyond shape.
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::vector<std::string> labels, double fill = 0.0);
  SquareMatrix(std::vector<std::string> labels, std::vector<double> values);

  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return values_[i * size() + j]; }
  double& operator()(std::size_t i, std::size_t j) noexcept { return values_[i * size() + j]; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  /// Index of a label; throws InvalidArgument when absent.
  std::size_t index_of(const std::string& label) const;
  /// Rows and columns reordered so that result.labels()[k] == labels()[order[k]].
  SquareMatrix permuted(std::span<const std::size_t> order) const;

 private:
  std::vector<std::string> labels_;
  std::vector<double> values_;
};

/// Symmetric, zero diagonal, finite and nonnegative. Validated on construction.
class DistanceMatrix : public SquareMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(SquareMatrix m);
  DistanceMatrix permuted(std::span<const std::size_t> order) const {
    return DistanceMatrix(SquareMatrix::permuted(order));
  }
};

/// Symmetric and finite. PSD-ness is a property of how it was produced and is
/// checked where it matters (inverse_gromov, matrix divergences).
class CovarianceMatrix : public SquareMatrix {
 public:
  CovarianceMatrix() = default;
  explicit CovarianceMatrix(SquareMatrix m);
};

/// Path-length distances between leaves, labels in tree.leaves() order.
/// Parallel over source leaves; identical output for any thread count.
DistanceMatrix patristic_matrix(const PhyloTree& tree);

/// C_ab = depth of the most recent common ancestor of a and b; C_aa = depth
/// of a. Throws InvalidArgument for unrooted trees.
CovarianceMatrix covariance_matrix(const PhyloTree& tree);

/// d_ij = C_ii + C_jj - 2 C_ij. Entries in [-1e-9, 0) are clamped to 0;
/// anything more negative throws NumericError (input is not PSD).
DistanceMatrix inverse_gromov(const SquareMatrix& c);

/// Largest patristic distance.
double diameter(const PhyloTree& tree);

/// Square TSV: header row "\tlabel1\tlabel2...", then "label\tv1\tv2..." rows.
void write_tsv(std::ostream& out, const SquareMatrix& m);
SquareMatrix read_tsv(std::istream& in);
void write_tsv_file(const std::filesystem::path& path, const SquareMatrix& m);
SquareMatrix read_tsv_file(const std::filesystem::path& path);

namespace serial {
/// Single-threaded reference for patristic_matrix.
DistanceMatrix patristic_matrix(const PhyloTree& tree);
}  // namespace serial

}  // namespace phylo
