#include "phylo/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "phylo/error.hpp"
#include "phylo/reference_nets.hpp"

namespace phylo::net {

namespace {

struct ArchName {
  Architecture arch;
  const char* name;
};

constexpr ArchName kArchNames[] = {
    {Architecture::SitesInvariantS, "SitesInvariantS"},
    {Architecture::FullInvariantS, "FullInvariantS"},
    {Architecture::SitesAttentionP, "SitesAttentionP"},
    {Architecture::HybridAttentionSP, "HybridAttentionSP"},
    {Architecture::FullAttentionS, "FullAttentionS"},
    {Architecture::FullAttentionSP, "FullAttentionSP"},
    {Architecture::ReferenceHamming, "ReferenceHamming"},
    {Architecture::ReferenceJC, "ReferenceJC"},
    {Architecture::ReferenceK2P, "ReferenceK2P"},
};

}  // namespace

std::string to_string(Architecture a) {
  for (const auto& e : kArchNames) {
    if (e.arch == a) return e.name;
  }
  return "?";
}

Architecture parse_architecture(const std::string& s) {
  for (const auto& e : kArchNames) {
    if (s == e.name) return e.arch;
  }
  std::string known;
  for (const auto& e : kArchNames) known += std::string(known.empty() ? "" : ", ") + e.name;
  throw InvalidArgument("unknown architecture '" + s + "' (expected one of " + known + ")");
}

std::string to_string(Head h) {
  switch (h) {
    case Head::EuclideanDistance: return "euclidean";
    case Head::InnerProduct: return "inner";
    case Head::PairScalar: return "pair";
  }
  return "?";
}

Head parse_head(const std::string& s) {
  if (s == "euclidean") return Head::EuclideanDistance;
  if (s == "inner") return Head::InnerProduct;
  if (s == "pair") return Head::PairScalar;
  throw InvalidArgument("unknown output head '" + s + "' (expected euclidean, inner or pair)");
}

bool is_reference(Architecture a) noexcept {
  return a == Architecture::ReferenceHamming || a == Architecture::ReferenceJC || a == Architecture::ReferenceK2P;
}

bool is_pair_network(Architecture a) noexcept {
  return is_reference(a) || a == Architecture::SitesAttentionP || a == Architecture::HybridAttentionSP ||
         a == Architecture::FullAttentionSP;
}

std::vector<Architecture> learned_architectures() {
  return {Architecture::SitesInvariantS,   Architecture::FullInvariantS, Architecture::SitesAttentionP,
          Architecture::HybridAttentionSP, Architecture::FullAttentionS, Architecture::FullAttentionSP};
}

void NetworkSpec::resolve() {
  if (is_reference(architecture)) {
    if (sites == 0) throw InvalidArgument("reference networks need the alignment length (sites)");
    head = Head::PairScalar;
    channels = architecture == Architecture::ReferenceK2P ? 2 : 4;
    heads = 1;
    embedding = 0;
    scalar_hidden = architecture == Architecture::ReferenceHamming ? 0
                    : architecture == Architecture::ReferenceJC    ? kReferenceKnots
                                                                   : 2 * kReferenceKnots;
    return;
  }
  if (is_pair_network(architecture)) {
    if (head != Head::PairScalar) throw InvalidArgument(to_string(architecture) + " only supports the pair head");
  } else if (head == Head::PairScalar) {
    head = Head::EuclideanDistance;
  }
  if (channels == 0) throw InvalidArgument("channels must be positive");
  if (heads == 0 || channels % heads != 0) {
    throw InvalidArgument("heads (" + std::to_string(heads) + ") must divide channels (" + std::to_string(channels) +
                          ")");
  }
  if (scalar_hidden == 0) throw InvalidArgument("scalar_hidden must be positive");
  if (embedding == 0) {
    const std::size_t n = std::max<std::size_t>(taxa, 2);
    const auto bits = static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(n))));
    embedding = std::max<std::size_t>(8, 4 * bits);
  }
}

Network::Network(NetworkSpec spec, std::uint64_t seed) : spec_(spec) {
  spec_.resolve();
  if (is_reference(spec_.architecture)) {
    build_reference();
    fill_reference_weights(*this);
  } else {
    Rng rng = Rng(seed).substream("network-init");
    build_learned(rng);
  }
}

void Network::build_reference() {
  Rng unused(0);
  ParamSet& ps = params_;
  layers_.ref_first = EquivariantPairLayer::make(ps, unused, "ref.first", 1, Activation::ReLU);
  layers_.ref_second = EquivariantPairLayer::make(ps, unused, "ref.second", 1, Activation::Identity);
  if (spec_.architecture == Architecture::ReferenceK2P) {
    layers_.ref_classes = ChannelConv::make(ps, unused, "ref.classes", 4, 3);
    layers_.ref_counts = ChannelConv::make(ps, unused, "ref.counts", 3, 2);
  }
  layers_.ref_pool = InvariantPairLayer::make(ps, "ref.pool", 0.0, 0.0);
  switch (spec_.architecture) {
    case Architecture::ReferenceHamming:
      layers_.scalar = ScalarMLP::make(ps, unused, "g", {4, 1}, Activation::ReLU, false);
      break;
    case Architecture::ReferenceJC:
      layers_.scalar = ScalarMLP::make(ps, unused, "g", {4, 1, spec_.scalar_hidden, 1}, Activation::ReLU, false);
      break;
    default:
      layers_.scalar = ScalarMLP::make(ps, unused, "g", {2, 2, spec_.scalar_hidden, 1}, Activation::ReLU, false);
      break;
  }
}

void Network::build_learned(Rng& rng) {
  ParamSet& ps = params_;
  const std::size_t d = spec_.channels, H = spec_.heads;
  layers_.input = ChannelConv::make(ps, rng, "input", 4, d);
  auto attention = [&](const std::string& name, std::size_t count, bool across_rows) {
    std::vector<AttentionLayer> out;
    for (std::size_t k = 0; k < count; ++k) {
      out.push_back(AttentionLayer::make(ps, rng, name + std::to_string(k + 1), d, H, across_rows));
    }
    return out;
  };
  switch (spec_.architecture) {
    case Architecture::SitesInvariantS:
    case Architecture::FullInvariantS: {
      const bool across = spec_.architecture == Architecture::FullInvariantS;
      for (std::size_t k = 0; k < 2; ++k) {
        layers_.sets.push_back(SiteSetLayer::make(ps, rng, "set" + std::to_string(k + 1), d, d, across));
      }
      break;
    }
    case Architecture::FullAttentionS:
      layers_.pre = attention("pre", 6, true);
      break;
    case Architecture::SitesAttentionP:
      layers_.pair = PairFormation::make(ps, rng, "pairs", d, H, d);
      layers_.post = attention("post", 6, false);
      break;
    case Architecture::HybridAttentionSP:
      layers_.pre = attention("pre", 3, true);
      layers_.pair = PairFormation::make(ps, rng, "pairs", d, H, d);
      layers_.post = attention("post", 3, false);
      break;
    case Architecture::FullAttentionSP:
      layers_.pre = attention("pre", 3, true);
      layers_.pair = PairFormation::make(ps, rng, "pairs", d, H, d);
      layers_.post = attention("post", 3, true);
      break;
    default:
      break;
  }
  if (layers_.pair) {
    const std::size_t h = spec_.scalar_hidden;
    layers_.scalar = ScalarMLP::make(ps, rng, "g", {d, h, h, 1}, Activation::ELU, true);
  } else {
    layers_.embed = ChannelConv::make(ps, rng, "embed", d, spec_.embedding);
  }
}

Network::Output Network::forward_reference(const Bound& p, Var one_hot) const {
  const std::size_t n = one_hot.shape()[0];
  if (one_hot.shape()[1] != spec_.sites) {
    throw InvalidArgument(to_string(spec_.architecture) + " was built for " + std::to_string(spec_.sites) +
                          " sites, got " + std::to_string(one_hot.shape()[1]));
  }
  Var h = layers_.ref_first->apply(p, make_pairs(one_hot, n));
  h = layers_.ref_second->apply(p, h);
  if (layers_.ref_classes) {
    h = ad::relu(layers_.ref_classes->apply(p, h));
    h = layers_.ref_counts->apply(p, h);
  }
  Output out;
  out.hidden = h;
  out.hidden_site_axis = 2;
  Var pooled = layers_.ref_pool->apply(p, h);
  Var s = layers_.scalar->apply(p, pooled);
  out.matrix = ad::pairs_to_matrix(ad::reshape(s, Shape{s.size()}), n);
  return out;
}

Network::Output Network::forward(const Bound& p, Var one_hot) const {
  const Shape& s = one_hot.shape();
  if (s.size() != 3 || s[2] != 4) throw InvalidArgument("network input must be one-hot [taxa, sites, 4], got " + shape_string(s));
  const std::size_t n = s[0];
  if (n < 2) throw InvalidArgument("network input needs at least 2 taxa");
  if (p.size() != params_.size()) throw InvalidArgument("bound parameter count does not match the network");
  if (is_reference(spec_.architecture)) return forward_reference(p, one_hot);

  Var x = ad::elu(layers_.input->apply(p, one_hot));
  for (const SiteSetLayer& l : layers_.sets) x = l.apply(p, x);
  for (const AttentionLayer& l : layers_.pre) x = l.apply(p, x);
  if (layers_.pair) {
    x = layers_.pair->apply(p, x);
    for (const AttentionLayer& l : layers_.post) x = l.apply(p, x);
  }
  Output out;
  out.hidden = x;
  out.hidden_site_axis = 1;
  Var pooled = ad::reduce(x, 1, true);
  if (layers_.pair) {
    Var v = layers_.scalar->apply(p, pooled);
    out.matrix = ad::pairs_to_matrix(ad::reshape(v, Shape{v.size()}), n);
    return out;
  }
  out.embedding = layers_.embed->apply(p, pooled);
  if (spec_.head == Head::InnerProduct) {
    out.gram = ad::gram(out.embedding);
    out.matrix = ad::inverse_gromov(out.gram);
  } else {
    out.matrix = ad::pairwise_euclidean(out.embedding);
  }
  return out;
}

Tensor Network::predict_tensor(const Tensor& one_hot) const {
  ad::Tape tape;
  const Bound p = params_.bind(tape, false);
  return forward(p, tape.constant(one_hot)).matrix.value();
}

DistanceMatrix Network::predict(const Alignment& a) const {
  const std::size_t n = a.taxa();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a.labels()[x] < a.labels()[y]; });
  const Alignment sorted = a.permuted_rows(order);
  Tensor m = predict_tensor(sorted.one_hot());
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!std::isfinite(m[i])) throw NumericError("network produced a non-finite distance");
    // Rounding in the inverse Gromov transform can leave -1e-17 on equal embeddings.
    if (m[i] < 0.0 && m[i] > -1e-9) m[i] = 0.0;
  }
  const DistanceMatrix canonical(SquareMatrix(sorted.labels(), std::move(m.storage())));
  std::vector<std::size_t> back(n);
  for (std::size_t k = 0; k < n; ++k) back[order[k]] = k;
  return canonical.permuted(back);
}

std::string Network::describe() const {
  std::ostringstream out;
  out << "architecture=" << to_string(spec_.architecture) << "\n"
      << "head=" << to_string(spec_.head) << "\n"
      << "channels=" << spec_.channels << "\n"
      << "heads=" << spec_.heads << "\n"
      << "embedding=" << spec_.embedding << "\n"
      << "scalar_hidden=" << spec_.scalar_hidden << "\n"
      << "taxa=" << spec_.taxa << "\n"
      << "sites=" << spec_.sites << "\n"
      << "site_set_layers=" << layers_.sets.size() << "\n"
      << "attention_layers_before_pairs=" << layers_.pre.size() << "\n"
      << "attention_layers_after_pairs=" << layers_.post.size() << "\n"
      << "parameters=" << parameter_count() << "\n";
  return out.str();
}

double site_pattern_compression(const Network& net, const Alignment& a) {
  ad::Tape tape;
  const Bound p = net.params().bind(tape, false);
  const Network::Output out = net.forward(p, tape.constant(a.one_hot()));
  const Tensor& h = out.hidden.value();
  const std::size_t axis = out.hidden_site_axis;
  std::size_t outer = 1, inner = 1;
  for (std::size_t k = 0; k < axis; ++k) outer *= h.dim(k);
  for (std::size_t k = axis + 1; k < h.rank(); ++k) inner *= h.dim(k);
  const std::size_t sites = h.dim(axis);

  std::set<std::vector<long long>> hidden_patterns;
  for (std::size_t s = 0; s < sites; ++s) {
    std::vector<long long> col;
    col.reserve(outer * inner);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < inner; ++i) col.push_back(std::llround(h[(o * sites + s) * inner + i] * 1e6));
    }
    hidden_patterns.insert(std::move(col));
  }
  std::set<std::vector<std::uint8_t>> input_patterns;
  for (std::size_t s = 0; s < a.length(); ++s) {
    std::vector<std::uint8_t> col(a.taxa());
    for (std::size_t t = 0; t < a.taxa(); ++t) col[t] = a.state(t, s);
    input_patterns.insert(std::move(col));
  }
  return static_cast<double>(hidden_patterns.size()) / static_cast<double>(input_patterns.size());
}

}  // namespace phylo::net
