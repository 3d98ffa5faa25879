#include "phylo/nj.hpp"

#include <algorithm>
#include <numeric>

#include "phylo/error.hpp"

namespace phylo::nj {

std::string to_string(Variant v) { return v == Variant::NJ ? "nj" : "bionj"; }

Variant parse_variant(const std::string& s) {
  if (s == "nj" || s == "NJ") return Variant::NJ;
  if (s == "bionj" || s == "BIONJ") return Variant::BIONJ;
  throw InvalidArgument("unknown tree builder '" + s + "' (expected nj or bionj)");
}

namespace {

class Joiner {
 public:
  Joiner(const DistanceMatrix& input, Variant variant) : variant_(variant) {
    n_ = input.size();
    if (n_ < 3) throw InvalidArgument("neighbor joining needs at least 3 taxa");
    std::vector<std::size_t> order(n_);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return input.labels()[a] < input.labels()[b]; });
    const DistanceMatrix d = input.permuted(order);

    dist_.assign(d.values().begin(), d.values().end());
    if (variant_ == Variant::BIONJ) var_ = dist_;
    active_.resize(n_);
    std::iota(active_.begin(), active_.end(), 0);
    for (std::size_t i = 0; i < n_; ++i) {
      TreeNode leaf;
      leaf.label = d.labels()[i];
      nodes_.push_back(leaf);
      slot_node_.push_back(static_cast<int>(i));
      names_.push_back(leaf.label);
    }
  }

  PhyloTree run(JoinTrace* trace) {
    while (active_.size() > 3) join_once(trace);
    finish();
    return PhyloTree(std::move(nodes_), static_cast<int>(nodes_.size()) - 1);
  }

 private:
  double& D(std::size_t i, std::size_t j) { return dist_[i * n_ + j]; }
  double& V(std::size_t i, std::size_t j) { return var_[i * n_ + j]; }

  void join_once(JoinTrace* trace) {
    const std::size_t r = active_.size();
    std::vector<double> sums(r, 0.0);
    for (std::size_t a = 0; a < r; ++a) {
      double s = 0.0;
      for (std::size_t b = 0; b < r; ++b) s += D(active_[a], active_[b]);
      sums[a] = s;
    }

    std::size_t best_a = 0, best_b = 1;
    double best_q = 0.0;
    bool first = true;
    const double rm2 = static_cast<double>(r - 2);
    for (std::size_t a = 0; a < r; ++a) {
      for (std::size_t b = a + 1; b < r; ++b) {
        const double q = rm2 * D(active_[a], active_[b]) - sums[a] - sums[b];
        if (first || q < best_q) {
          best_q = q;
          best_a = a;
          best_b = b;
          first = false;
        }
      }
    }

    const std::size_t i = active_[best_a], j = active_[best_b];
    const double dij = D(i, j);
    const double bi = 0.5 * dij + (sums[best_a] - sums[best_b]) / (2.0 * rm2);
    const double bj = dij - bi;

    double lambda = 0.5;
    if (variant_ == Variant::BIONJ) {
      const double vij = V(i, j);
      if (vij > 0.0) {
        double acc = 0.0;
        for (std::size_t k : active_) {
          if (k != i && k != j) acc += V(j, k) - V(i, k);
        }
        lambda = std::clamp(0.5 + acc / (2.0 * rm2 * vij), 0.0, 1.0);
      }
    }

    for (std::size_t k : active_) {
      if (k == i || k == j) continue;
      double duk;
      if (variant_ == Variant::BIONJ) {
        duk = lambda * (D(i, k) - bi) + (1.0 - lambda) * (D(j, k) - bj);
        const double vuk = lambda * V(i, k) + (1.0 - lambda) * V(j, k) - lambda * (1.0 - lambda) * V(i, j);
        V(i, k) = vuk;
        V(k, i) = vuk;
      } else {
        duk = 0.5 * (D(i, k) + D(j, k) - dij);
      }
      D(i, k) = duk;
      D(k, i) = duk;
    }

    const int parent = static_cast<int>(nodes_.size());
    nodes_.push_back(TreeNode{});
    attach(parent, slot_node_[i], bi);
    attach(parent, slot_node_[j], bj);
    if (trace) trace->push_back({names_[i], names_[j], best_q, std::max(bi, 0.0), std::max(bj, 0.0)});

    // The new cluster takes slot i, keeping slots ordered by smallest member label.
    slot_node_[i] = parent;
    names_[i] = "(" + names_[i] + "," + names_[j] + ")";
    active_.erase(active_.begin() + static_cast<std::ptrdiff_t>(best_b));
  }

  void finish() {
    const int root = static_cast<int>(nodes_.size());
    nodes_.push_back(TreeNode{});
    if (active_.size() == 3) {
      const std::size_t a = active_[0], b = active_[1], c = active_[2];
      attach(root, slot_node_[a], 0.5 * (D(a, b) + D(a, c) - D(b, c)));
      attach(root, slot_node_[b], 0.5 * (D(a, b) + D(b, c) - D(a, c)));
      attach(root, slot_node_[c], 0.5 * (D(a, c) + D(b, c) - D(a, b)));
    }
  }

  void attach(int parent, int child, double length) {
    nodes_[child].parent = parent;
    nodes_[child].length = std::max(length, 0.0);
    nodes_[parent].children.push_back(child);
  }

  Variant variant_;
  std::size_t n_ = 0;
  std::vector<double> dist_, var_;
  std::vector<std::size_t> active_;
  std::vector<TreeNode> nodes_;
  std::vector<int> slot_node_;
  std::vector<std::string> names_;
};

}  // namespace

PhyloTree neighbor_join(const DistanceMatrix& d, JoinTrace* trace) { return Joiner(d, Variant::NJ).run(trace); }

PhyloTree bionj(const DistanceMatrix& d, JoinTrace* trace) { return Joiner(d, Variant::BIONJ).run(trace); }

PhyloTree build_tree(const DistanceMatrix& d, Variant v, JoinTrace* trace) { return Joiner(d, v).run(trace); }

}  // namespace phylo::nj
