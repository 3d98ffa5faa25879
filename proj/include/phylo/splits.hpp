#pragma once

#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "phylo/tree.hpp"

namespace phylo {

/// Bipartition of the taxon set as a bitset over the sorted taxon list,
/// stored as the side containing taxon 0 (the lexicographically smallest).
struct Split {
  std::vector<std::uint64_t> bits;
  bool operator==(const Split&) const = default;
};

struct SplitHash {
  std::size_t operator()(const Split& s) const noexcept;
};

/// Non-trivial splits (both sides at least two taxa) of a tree, computed on
/// its unrooted form.
class SplitSet {
 public:
  SplitSet() = default;
  SplitSet(std::vector<std::string> taxa, std::unordered_set<Split, SplitHash> splits)
      : taxa_(std::move(taxa)), splits_(std::move(splits)) {}

  /// Sorted taxon labels; bit i of a split refers to taxa()[i].
  const std::vector<std::string>& taxa() const noexcept { return taxa_; }
  const std::unordered_set<Split, SplitHash>& splits() const noexcept { return splits_; }
  std::size_t size() const noexcept { return splits_.size(); }
  bool contains(const Split& s) const { return splits_.count(s) != 0; }

  bool operator==(const SplitSet& other) const {
    return taxa_ == other.taxa_ && splits_ == other.splits_;
  }

 private:
  std::vector<std::string> taxa_;
  std::unordered_set<Split, SplitHash> splits_;
};

/// With collapse_zero_length set, internal edges of length exactly 0 are
/// treated as contracted and contribute no split.
SplitSet splits(const PhyloTree& tree, bool collapse_zero_length = false);

/// Normalized Robinson-Foulds distance |A xor B| / |A union B| in [0, 1].
/// Both trees are unrooted first. Throws InvalidArgument on different leaf sets.
double rf_distance(const PhyloTree& a, const PhyloTree& b, bool collapse_zero_length = false);

/// Unnormalized symmetric-difference count.
std::size_t rf_count(const PhyloTree& a, const PhyloTree& b, bool collapse_zero_length = false);

}  // namespace phylo
