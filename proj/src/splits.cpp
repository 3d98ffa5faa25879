#include "phylo/splits.hpp"

#include <algorithm>
#include <unordered_map>

#include "phylo/error.hpp"

namespace phylo {

std::size_t SplitHash::operator()(const Split& s) const noexcept {
  std::size_t h = 0x9e3779b97f4a7c15ull;
  for (std::uint64_t w : s.bits) h = (h ^ w) * 0x100000001b3ull + (h >> 17);
  return h;
}

SplitSet splits(const PhyloTree& tree, bool collapse_zero_length) {
  const PhyloTree t = tree.unrooted();
  std::vector<std::string> taxa = t.leaf_labels();
  std::sort(taxa.begin(), taxa.end());
  const std::size_t n = taxa.size();
  const std::size_t words = (n + 63) / 64;

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index.emplace(taxa[i], i);

  std::vector<std::uint64_t> tail_mask(words, ~0ull);
  if (n % 64) tail_mask.back() = (1ull << (n % 64)) - 1;

  std::vector<std::vector<std::uint64_t>> below(t.node_count(), std::vector<std::uint64_t>(words, 0));
  std::vector<std::size_t> count(t.node_count(), 0);
  std::unordered_set<Split, SplitHash> out;

  const std::vector<int> order = t.preorder();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int id = *it;
    const TreeNode& node = t.node(id);
    if (node.is_leaf()) {
      const std::size_t i = index.at(node.label);
      below[id][i / 64] |= 1ull << (i % 64);
      count[id] = 1;
    }
    if (node.parent >= 0) {
      for (std::size_t w = 0; w < words; ++w) below[node.parent][w] |= below[id][w];
      count[node.parent] += count[id];
    }
    if (id == t.root() || node.is_leaf()) continue;
    if (count[id] < 2 || n - count[id] < 2) continue;
    if (collapse_zero_length && node.length == 0.0) continue;
    Split s{below[id]};
    if (!(s.bits[0] & 1ull)) {
      for (std::size_t w = 0; w < words; ++w) s.bits[w] = ~s.bits[w] & tail_mask[w];
    }
    out.insert(std::move(s));
  }
  return SplitSet(std::move(taxa), std::move(out));
}

namespace {

std::pair<std::size_t, std::size_t> symmetric_difference_and_union(const SplitSet& a, const SplitSet& b) {
  if (a.taxa() != b.taxa()) throw InvalidArgument("rf_distance: trees have different leaf sets");
  std::size_t shared = 0;
  for (const Split& s : a.splits()) shared += b.contains(s);
  const std::size_t uni = a.size() + b.size() - shared;
  return {uni - shared, uni};
}

}  // namespace

double rf_distance(const PhyloTree& a, const PhyloTree& b, bool collapse_zero_length) {
  const auto [diff, uni] = symmetric_difference_and_union(splits(a, collapse_zero_length),
                                                          splits(b, collapse_zero_length));
  return uni == 0 ? 0.0 : static_cast<double>(diff) / static_cast<double>(uni);
}

std::size_t rf_count(const PhyloTree& a, const PhyloTree& b, bool collapse_zero_length) {
  return symmetric_difference_and_union(splits(a, collapse_zero_length), splits(b, collapse_zero_length)).first;
}

}  // namespace phylo
