#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "phylo/matrix.hpp"
#include "phylo/rng.hpp"
#include "phylo/simulate.hpp"
#include "phylo/tape.hpp"
#include "phylo/tensor.hpp"
#include "phylo/tree.hpp"

namespace testing {

inline phylo::Tensor random_tensor(phylo::Rng& rng, phylo::Shape shape, double scale = 1.0) {
  phylo::Tensor t(std::move(shape));
  for (double& v : t.data()) v = scale * rng.normal();
  return t;
}

inline std::vector<std::size_t> random_permutation(phylo::Rng& rng, std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.index(i)]);
  return p;
}

inline phylo::PhyloTree bd_tree(int n, std::uint64_t seed) {
  phylo::sim::BDParams p;
  p.n = n;
  return phylo::sim::simulate_bd_tree(p, seed);
}

inline phylo::PhyloTree scaled_tree(const phylo::PhyloTree& t, double factor) {
  auto nodes = t.nodes();
  for (auto& node : nodes) node.length *= factor;
  return phylo::PhyloTree(std::move(nodes), t.root());
}

/// Entry of `m` for a pair of labels.
inline double lookup(const phylo::SquareMatrix& m, const std::string& a, const std::string& b) {
  return m(m.index_of(a), m.index_of(b));
}

inline double max_abs_diff(const phylo::SquareMatrix& a, const phylo::SquareMatrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) {
      worst = std::max(worst, std::abs(a(i, j) - lookup(b, a.labels()[i], a.labels()[j])));
    }
  }
  return worst;
}

using ScalarFn = std::function<phylo::ad::Var(phylo::ad::Tape&, const std::vector<phylo::ad::Var>&)>;

/// ||analytic - numeric|| / max(||analytic||, ||numeric||, tiny) over every input,
/// with central differences of step h.
inline double gradient_error(const ScalarFn& f, const std::vector<phylo::Tensor>& inputs, double h = 1e-4) {
  phylo::ad::Tape tape;
  std::vector<phylo::ad::Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.variable(t));
  const phylo::ad::Var out = f(tape, vars);
  tape.backward(out);
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const phylo::Tensor g = tape.gradient(vars[k]);
    for (std::size_t e = 0; e < inputs[k].size(); ++e) {
      auto eval = [&](double delta) {
        std::vector<phylo::Tensor> moved = inputs;
        moved[k][e] += delta;
        phylo::ad::Tape t2;
        std::vector<phylo::ad::Var> v2;
        for (const auto& t : moved) v2.push_back(t2.variable(t));
        return f(t2, v2).value()[0];
      };
      const double numeric = (eval(h) - eval(-h)) / (2.0 * h);
      diff += (g[e] - numeric) * (g[e] - numeric);
      na += g[e] * g[e];
      nn += numeric * numeric;
    }
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
}

/// Fresh empty directory under the system temp path.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("phylodnn-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
