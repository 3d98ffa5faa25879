#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "phylo/alignment.hpp"
#include "phylo/layers.hpp"
#include "phylo/matrix.hpp"

namespace phylo::net {

enum class Architecture {
  SitesInvariantS,
  FullInvariantS,
  SitesAttentionP,
  HybridAttentionSP,
  FullAttentionS,
  FullAttentionSP,
  // Fixed-weight constructions of the analytic distances.
  ReferenceHamming,
  ReferenceJC,
  ReferenceK2P,
};

enum class Head {
  EuclideanDistance,  ///< ||Z_i - Z_j|| of a per-taxon embedding
  InnerProduct,       ///< Gram matrix Z Z^T, reported through inverse_gromov
  PairScalar,         ///< one nonnegative scalar per pair
};

std::string to_string(Architecture a);
Architecture parse_architecture(const std::string& s);
std::string to_string(Head h);
Head parse_head(const std::string& s);

bool is_reference(Architecture a) noexcept;
bool is_pair_network(Architecture a) noexcept;
std::vector<Architecture> learned_architectures();

struct NetworkSpec {
  Architecture architecture = Architecture::SitesAttentionP;
  Head head = Head::PairScalar;
  std::size_t channels = 64;       ///< hidden width d
  std::size_t heads = 4;           ///< attention and pair-layer heads
  std::size_t embedding = 0;       ///< S networks: width of Z; 0 picks max(8, 4*ceil(log2 taxa))
  std::size_t scalar_hidden = 32;  ///< hidden width of the pair scalar map
  std::size_t taxa = 20;           ///< expected taxon count (sizes the default embedding)
  std::size_t sites = 0;           ///< reference networks only: the alignment length they were built for

  /// Fills defaults that depend on other fields and checks consistency.
  void resolve();
};

/// Distance network: layers plus named parameters.
class Network {
 public:
  /// Builds the layer stack for `spec` with parameters drawn from `seed`.
  /// Reference architectures ignore the seed and carry their fixed weights.
  Network(NetworkSpec spec, std::uint64_t seed);

  const NetworkSpec& spec() const noexcept { return spec_; }
  ParamSet& params() noexcept { return params_; }
  const ParamSet& params() const noexcept { return params_; }
  std::size_t parameter_count() const noexcept { return params_.scalar_count(); }

  struct Output {
    Var matrix;     ///< [n,n] predicted distances, exactly symmetric, zero diagonal
    Var gram;       ///< InnerProduct head only: Z Z^T
    Var embedding;  ///< S networks: Z [n,k]
    Var hidden;     ///< final per-site hidden activation
    std::size_t hidden_site_axis = 1;
  };

  /// Forward pass on a one-hot tensor [n,L,4]; rows are taken in the given order.
  Output forward(const Bound& p, Var one_hot) const;

  /// Distances for an alignment, labelled in the alignment's row order. Rows are
  /// evaluated in sorted-label order, so reordering the input only reorders the output.
  DistanceMatrix predict(const Alignment& a) const;
  /// Raw [n,n] output for a one-hot tensor, rows in the given order.
  Tensor predict_tensor(const Tensor& one_hot) const;

  /// Layer widths and counts, one "key=value" per line.
  std::string describe() const;

  // Exposed so reference constructions can set their fixed weights.
  struct Layers {
    std::optional<ChannelConv> input;
    std::vector<SiteSetLayer> sets;
    std::vector<AttentionLayer> pre;
    std::optional<PairFormation> pair;
    std::vector<AttentionLayer> post;
    std::optional<ChannelConv> embed;
    std::optional<ScalarMLP> scalar;
    std::optional<EquivariantPairLayer> ref_first, ref_second;
    std::optional<ChannelConv> ref_classes, ref_counts;
    std::optional<InvariantPairLayer> ref_pool;
  };
  const Layers& layers() const noexcept { return layers_; }

 private:
  void build_learned(Rng& rng);
  void build_reference();
  Output forward_reference(const Bound& p, Var one_hot) const;

  NetworkSpec spec_;
  ParamSet params_;
  Layers layers_;
};

/// Unique hidden site columns over unique input site columns (coordinates compared
/// on a 1e-6 grid).
double site_pattern_compression(const Network& net, const Alignment& a);

}  // namespace phylo::net
