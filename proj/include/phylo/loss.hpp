#pragma once

#include <string>
#include <utility>
#include <vector>

#include "phylo/ops.hpp"

namespace phylo::train {

using ad::Var;

enum class LossKind { MAE, MSE, L21, LogDet, VonNeumann };

std::string to_string(LossKind k);
LossKind parse_loss_kind(const std::string& s);

struct LossSpec {
  LossKind kind = LossKind::MAE;
  /// Distances enter the matrix divergences as exp(-gamma * D).
  double gamma = 1.0;

  void validate() const;
};

/// Loss for one tree. `distances` says whether pred/target are distance matrices
/// (transformed before a divergence) or already PSD (Gram vs covariance).
/// MAE/MSE average over the upper triangle; L21 gives sqrt(MSE). Divergences
/// compare the prediction X against the target Y as D(X || Y).
Var tree_loss(const LossSpec& spec, Var pred, Var target, bool distances = true);

/// Weight of each tree in a batch of `count`: 1 for L21 (summed), 1/count otherwise.
double batch_weight(const LossSpec& spec, std::size_t count);

/// Combines per-tree losses of a batch: L21 sums them, everything else averages.
Var batch_loss(const LossSpec& spec, const std::vector<Var>& per_tree);

/// Convenience evaluation outside training.
double loss_value(const LossSpec& spec, const Tensor& pred, const Tensor& target, bool distances = true);

}  // namespace phylo::train
