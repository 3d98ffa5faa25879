#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace phylo {

struct TreeNode {
  int parent = -1;
  std::vector<int> children;
  /// Length of the edge to the parent, substitutions per site. Ignored on the root.
  double length = 0.0;
  /// Taxon name on leaves; optional on internal nodes.
  std::string label;

  bool is_leaf() const noexcept { return children.empty(); }
};

/// Weighted tree over labelled taxa, stored as a node table with parent and
/// child links. Immutable once constructed.
///
/// A rooted binary tree has a root with two children; the unrooted
/// representation hangs the tree from an internal node with three children.
class PhyloTree {
 public:
  PhyloTree() = default;

  /// Validates structure, branch lengths and leaf labels. Throws InvalidArgument.
  PhyloTree(std::vector<TreeNode> nodes, int root);

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  const TreeNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  int root() const noexcept { return root_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }

  /// Root has exactly two children.
  bool rooted() const noexcept;
  /// Every internal node has two children, except a three-child root.
  bool is_binary() const noexcept;

  /// Leaf node ids in preorder.
  const std::vector<int>& leaves() const noexcept { return leaves_; }
  std::size_t leaf_count() const noexcept { return leaves_.size(); }
  /// Leaf labels in the same order as leaves().
  std::vector<std::string> leaf_labels() const;

  /// Nodes in preorder (parents before children).
  std::vector<int> preorder() const;
  /// Distance from the root to each node.
  std::vector<double> depths() const;

  /// Copy with the degree-two root suppressed (its two edges merged).
  /// Unrooted trees are returned unchanged.
  PhyloTree unrooted() const;

 private:
  std::vector<TreeNode> nodes_;
  int root_ = -1;
  std::vector<int> leaves_;
};

}  // namespace phylo
