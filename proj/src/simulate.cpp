#include "phylo/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "phylo/error.hpp"

namespace phylo::sim {

void BDParams::validate() const {
  if (!(mu >= 0.0) || !(lambda > mu) || !std::isfinite(lambda)) {
    throw InvalidArgument("birth-death rates must satisfy lambda > mu >= 0");
  }
  if (n < 3) throw InvalidArgument("birth-death leaf count must be at least 3");
}

std::string leaf_name(std::size_t index, std::size_t n) {
  const std::string digits = std::to_string(index + 1);
  const std::size_t width = std::to_string(n).size();
  return "t" + std::string(width - digits.size(), '0') + digits;
}

namespace {

struct Lineage {
  double birth = 0.0;
  double end = 0.0;
  bool extant = false;
  std::vector<int> children;
};

class Pruner {
 public:
  explicit Pruner(const std::vector<Lineage>& lin) : lin_(lin), has_extant_(lin.size(), 0) {
    // Lineages are created after their parents, so a reverse sweep sees children first.
    for (int i = static_cast<int>(lin.size()) - 1; i >= 0; --i) {
      bool any = lin[i].extant;
      for (int c : lin[i].children) any = any || has_extant_[c];
      has_extant_[i] = any;
    }
  }

  std::vector<TreeNode> build(int root, int& new_root) {
    new_root = emit(root, -1, 0.0);
    out_[new_root].length = 0.0;
    return std::move(out_);
  }

 private:
  int emit(int id, int parent, double carried) {
    const Lineage& l = lin_[id];
    const double len = carried + (l.end - l.birth);
    std::vector<int> kept;
    for (int c : l.children) {
      if (has_extant_[c]) kept.push_back(c);
    }
    if (!l.extant && kept.size() == 1) return emit(kept[0], parent, len);

    const int me = static_cast<int>(out_.size());
    out_.push_back(TreeNode{});
    out_[me].parent = parent;
    out_[me].length = len;
    for (int c : kept) {
      const int child = emit(c, me, 0.0);
      out_[me].children.push_back(child);
    }
    return me;
  }

  const std::vector<Lineage>& lin_;
  std::vector<char> has_extant_;
  std::vector<TreeNode> out_;
};

}  // namespace

PhyloTree simulate_bd_tree(const BDParams& p, std::uint64_t seed) {
  p.validate();
  Rng rng = Rng(seed).substream("bd-tree");
  const double total = p.lambda + p.mu;
  const double birth_prob = p.lambda / total;
  const std::size_t n = static_cast<std::size_t>(p.n);

  for (;;) {
    std::vector<Lineage> lin(3);
    lin[0].children = {1, 2};  // crown split at time 0
    std::vector<int> alive{1, 2};
    double t = 0.0;
    while (!alive.empty() && alive.size() < n) {
      t += rng.exponential(total * static_cast<double>(alive.size()));
      const std::size_t pick = rng.index(alive.size());
      const int x = alive[pick];
      lin[x].end = t;
      alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(pick));
      if (rng.uniform() < birth_prob) {
        for (int k = 0; k < 2; ++k) {
          const int child = static_cast<int>(lin.size());
          lin.push_back(Lineage{t, t, false, {}});
          lin[x].children.push_back(child);
          alive.push_back(child);
        }
      }
    }
    if (alive.size() < n) continue;  // extinct; resimulate

    t += rng.exponential(total * static_cast<double>(n));
    for (int x : alive) {
      lin[x].end = t;
      lin[x].extant = true;
    }

    int root = -1;
    std::vector<TreeNode> nodes = Pruner(lin).build(0, root);

    std::vector<std::size_t> names(n);
    std::iota(names.begin(), names.end(), 0);
    std::shuffle(names.begin(), names.end(), rng);
    std::size_t next = 0;
    for (auto& node : nodes) {
      if (node.children.empty()) node.label = leaf_name(names[next++], n);
    }
    return PhyloTree(std::move(nodes), root);
  }
}

namespace {

int draw_state(const Vec4& probs, double u) {
  double acc = 0.0;
  for (int j = 0; j < 3; ++j) {
    acc += probs[j];
    if (u < acc) return j;
  }
  return 3;
}

class SiteEvolver {
 public:
  SiteEvolver(const PhyloTree& tree, const SubstModel& model, std::uint64_t seed)
      : tree_(tree), model_((model.validate(), model)), kernel_(model), base_(Rng(seed)),
        order_(tree.preorder()) {
    if (!model_.gamma_shape) {
      fixed_.resize(tree.node_count());
      for (int id : order_) fixed_[id] = kernel_.probabilities(tree.node(id).length);
    }
  }

  void evolve_site(std::size_t site, std::size_t length, std::vector<int>& state,
                   std::vector<std::uint8_t>& out) const {
    Rng rng = base_.substream("site", site);
    double rate = 1.0;
    if (model_.gamma_shape) rate = rng.gamma(*model_.gamma_shape, 1.0 / *model_.gamma_shape);
    state[tree_.root()] = draw_state(kernel_.frequencies(), rng.uniform());
    for (int id : order_) {
      if (id == tree_.root()) continue;
      const int from = state[tree_.node(id).parent];
      const Vec4 row = model_.gamma_shape ? kernel_.row(from, rate * tree_.node(id).length) : fixed_[id][from];
      state[id] = draw_state(row, rng.uniform());
    }
    const auto& leaves = tree_.leaves();
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      out[i * length + site] = static_cast<std::uint8_t>(state[leaves[i]]);
    }
  }

 private:
  const PhyloTree& tree_;
  SubstModel model_;
  TransitionKernel kernel_;
  Rng base_;
  std::vector<int> order_;
  std::vector<Mat4> fixed_;
};

void check_inputs(const PhyloTree& tree, std::size_t length) {
  if (length == 0) throw InvalidArgument("alignment length must be at least 1");
  if (tree.leaf_count() == 0) throw InvalidArgument("tree has no leaves");
}

}  // namespace

Alignment evolve_alignment(const PhyloTree& tree, const SubstModel& model, std::size_t length,
                           std::uint64_t seed) {
  check_inputs(tree, length);
  const SiteEvolver evolver(tree, model, seed);
  std::vector<std::uint8_t> states(tree.leaf_count() * length);
#pragma omp parallel
  {
    std::vector<int> node_state(tree.node_count());
#pragma omp for schedule(static)
    for (std::size_t s = 0; s < length; ++s) evolver.evolve_site(s, length, node_state, states);
  }
  return Alignment(tree.leaf_labels(), length, std::move(states));
}

namespace serial {
Alignment evolve_alignment(const PhyloTree& tree, const SubstModel& model, std::size_t length,
                           std::uint64_t seed) {
  check_inputs(tree, length);
  const SiteEvolver evolver(tree, model, seed);
  std::vector<std::uint8_t> states(tree.leaf_count() * length);
  std::vector<int> node_state(tree.node_count());
  for (std::size_t s = 0; s < length; ++s) evolver.evolve_site(s, length, node_state, states);
  return Alignment(tree.leaf_labels(), length, std::move(states));
}
}  // namespace serial

}  // namespace phylo::sim
