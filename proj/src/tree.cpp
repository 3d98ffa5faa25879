#include "phylo/tree.hpp"

#include <cmath>
#include <unordered_set>

#include "phylo/error.hpp"

namespace phylo {

PhyloTree::PhyloTree(std::vector<TreeNode> nodes, int root) : nodes_(std::move(nodes)), root_(root) {
  const int count = static_cast<int>(nodes_.size());
  if (root_ < 0 || root_ >= count) throw InvalidArgument("tree root index out of range");
  if (nodes_[root_].parent != -1) throw InvalidArgument("tree root has a parent");

  std::vector<int> seen(nodes_.size(), 0);
  std::unordered_set<std::string> labels;
  std::vector<int> stack{root_};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    if (seen[id]++) throw InvalidArgument("tree contains a cycle or shared child");
    const TreeNode& n = nodes_[id];
    if (id != root_ && (!std::isfinite(n.length) || n.length < 0.0)) {
      throw InvalidArgument("negative or non-finite branch length on node '" + n.label + "'");
    }
    if (n.is_leaf()) {
      if (n.label.empty()) throw InvalidArgument("unlabelled leaf");
      if (!labels.insert(n.label).second) throw InvalidArgument("duplicate leaf label '" + n.label + "'");
      leaves_.push_back(id);
    }
    for (auto it = n.children.rbegin(); it != n.children.rend(); ++it) {
      const int c = *it;
      if (c < 0 || c >= count) throw InvalidArgument("child index out of range");
      if (nodes_[c].parent != id) throw InvalidArgument("inconsistent parent link");
      stack.push_back(c);
    }
  }
  for (int i = 0; i < count; ++i) {
    if (!seen[i]) throw InvalidArgument("node unreachable from the root");
  }
}

bool PhyloTree::rooted() const noexcept {
  return root_ >= 0 && nodes_[root_].children.size() == 2;
}

bool PhyloTree::is_binary() const noexcept {
  for (int id = 0; id < static_cast<int>(nodes_.size()); ++id) {
    const std::size_t k = nodes_[id].children.size();
    if (k == 0) continue;
    if (k == 2) continue;
    if (k == 3 && id == root_) continue;
    return false;
  }
  return true;
}

std::vector<std::string> PhyloTree::leaf_labels() const {
  std::vector<std::string> out;
  out.reserve(leaves_.size());
  for (int id : leaves_) out.push_back(nodes_[id].label);
  return out;
}

std::vector<int> PhyloTree::preorder() const {
  std::vector<int> order;
  order.reserve(nodes_.size());
  std::vector<int> stack{root_};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    order.push_back(id);
    const auto& ch = nodes_[id].children;
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
  }
  return order;
}

std::vector<double> PhyloTree::depths() const {
  std::vector<double> depth(nodes_.size(), 0.0);
  for (int id : preorder()) {
    if (id != root_) depth[id] = depth[nodes_[id].parent] + nodes_[id].length;
  }
  return depth;
}

PhyloTree PhyloTree::unrooted() const {
  if (!rooted()) return *this;
  const auto& rc = nodes_[root_].children;
  int keep = rc[0], other = rc[1];
  if (nodes_[keep].is_leaf()) std::swap(keep, other);
  if (nodes_[keep].is_leaf()) return *this;  // two-leaf tree has no unrooted form

  // Rebuild without the old root; `keep` becomes the new root.
  std::vector<int> remap(nodes_.size(), -1);
  int next = 0;
  for (int id = 0; id < static_cast<int>(nodes_.size()); ++id) {
    if (id != root_) remap[id] = next++;
  }
  std::vector<TreeNode> out(nodes_.size() - 1);
  for (int id = 0; id < static_cast<int>(nodes_.size()); ++id) {
    if (id == root_) continue;
    TreeNode n = nodes_[id];
    n.parent = n.parent == root_ ? -1 : remap[n.parent];
    for (int& c : n.children) c = remap[c];
    out[remap[id]] = std::move(n);
  }
  TreeNode& new_root = out[remap[keep]];
  TreeNode& moved = out[remap[other]];
  moved.parent = remap[keep];
  moved.length = nodes_[keep].length + nodes_[other].length;
  new_root.parent = -1;
  new_root.length = 0.0;
  new_root.children.push_back(remap[other]);
  return PhyloTree(std::move(out), remap[keep]);
}

}  // namespace phylo
