#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "phylo/ops.hpp"
#include "phylo/rng.hpp"

namespace phylo::net {

using ad::Var;

/// Named parameter tensors, in registration order.
class ParamSet {
 public:
  std::size_t add(std::string name, Tensor value);

  std::size_t size() const noexcept { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  Tensor& value(std::size_t i) { return values_.at(i); }
  const Tensor& value(std::size_t i) const { return values_.at(i); }
  std::optional<std::size_t> find(const std::string& name) const;
  Tensor& value(const std::string& name);

  /// Total number of scalars.
  std::size_t scalar_count() const noexcept;

  /// Puts every parameter on the tape, as variables or as constants.
  std::vector<Var> bind(ad::Tape& tape, bool trainable) const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

/// Bound parameters for one forward pass.
using Bound = std::vector<Var>;

enum class Activation { Identity, ReLU, ELU };

Var activate(Var x, Activation a);

/// Parameter initialization: normal with standard deviation gain / sqrt(fan_in).
Tensor init_weights(Rng& rng, std::size_t fan_in, std::size_t fan_out, double gain = 1.0);

/// Kernel-size-1 convolution along sites: a linear map over the channel axis.
struct ChannelConv {
  std::size_t weight = 0;
  std::optional<std::size_t> bias;
  std::size_t in = 0, out = 0;

  static ChannelConv make(ParamSet& ps, Rng& rng, const std::string& name, std::size_t in, std::size_t out,
                          bool with_bias = true, double gain = 1.0);
  Var apply(const Bound& p, Var x) const;
};

/// Five-term pair layer applied with H heads; see ad::equivariant_pair.
struct EquivariantPairLayer {
  std::size_t weight = 0;  // [H,5]
  std::size_t heads = 1;
  Activation activation = Activation::Identity;

  static EquivariantPairLayer make(ParamSet& ps, Rng& rng, const std::string& name, std::size_t heads,
                                   Activation act);
  Var apply(const Bound& p, Var x) const;
};

/// Sums a pair tensor over both sequences and all sites; see ad::invariant_pair.
struct InvariantPairLayer {
  std::size_t weight = 0;  // [2]

  static InvariantPairLayer make(ParamSet& ps, const std::string& name, double w0, double w1);
  Var apply(const Bound& p, Var x) const;
};

/// DeepSets layer on [B,L,C]: per-site map plus the broadcast site mean,
/// optionally the broadcast mean over axis 0 and the global mean. ELU output.
struct SiteSetLayer {
  ChannelConv self;
  ChannelConv site_mean;
  std::optional<ChannelConv> row_mean;
  std::optional<ChannelConv> global_mean;

  static SiteSetLayer make(ParamSet& ps, Rng& rng, const std::string& name, std::size_t in, std::size_t out,
                           bool across_rows);
  Var apply(const Bound& p, Var x) const;
};

/// Multi-head scaled dot-product self-attention with a residual connection.
/// Input [B,T,d]; attends over T (axis 1) or over B (axis 0).
struct AttentionBlock {
  std::size_t wq = 0, wk = 0, wv = 0;  // each [d,d], split column-wise into heads
  std::size_t dim = 0, heads = 1;

  static AttentionBlock make(ParamSet& ps, Rng& rng, const std::string& name, std::size_t dim, std::size_t heads);
  Var apply(const Bound& p, Var x, std::size_t axis) const;
  /// Attention weights [B*H, T, T] of the last call through `weights`, for inspection.
  Var apply(const Bound& p, Var x, std::size_t axis, Var* weights) const;
};

/// x + W2 elu(W1 x + b1) + b2 along channels.
struct ChannelMLP {
  ChannelConv first, second;

  static ChannelMLP make(ParamSet& ps, Rng& rng, const std::string& name, std::size_t dim, std::size_t hidden);
  Var apply(const Bound& p, Var x) const;
};

/// Attention over sites, optionally over axis 0 as well, then a channel MLP.
struct AttentionLayer {
  AttentionBlock sites;
  std::optional<AttentionBlock> rows;
  ChannelMLP mlp;

  static AttentionLayer make(ParamSet& ps, Rng& rng, const std::string& name, std::size_t dim, std::size_t heads,
                             bool across_rows);
  Var apply(const Bound& p, Var x) const;
};

/// Pointwise MLP on the last axis: hidden layers with an activation, linear output,
/// then optionally softplus.
struct ScalarMLP {
  std::vector<ChannelConv> layers;
  Activation hidden = Activation::ELU;
  bool softplus_output = true;

  static ScalarMLP make(ParamSet& ps, Rng& rng, const std::string& name, const std::vector<std::size_t>& widths,
                        Activation hidden, bool softplus_output);
  Var apply(const Bound& p, Var x) const;
};

/// Pairs (i<j) of n rows in row-major order.
std::vector<std::pair<std::size_t, std::size_t>> pair_indices(std::size_t n);

/// Builds the [P,2,L,C] pair tensor from per-taxon features [n,L,C].
Var make_pairs(Var x, std::size_t n);

/// [n,L,C] -> [P,L,d]: pair tensor, equivariant layer, ELU, sum over the two
/// sequences (so swapping a pair changes nothing), channel map to d.
struct PairFormation {
  EquivariantPairLayer mix;
  ChannelConv project;

  static PairFormation make(ParamSet& ps, Rng& rng, const std::string& name, std::size_t in, std::size_t heads,
                            std::size_t out);
  Var apply(const Bound& p, Var x) const;
};

}  // namespace phylo::net
