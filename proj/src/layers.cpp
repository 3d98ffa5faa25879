#include "phylo/layers.hpp"

#include <cmath>

#include "phylo/error.hpp"

namespace phylo::net {

std::size_t ParamSet::add(std::string name, Tensor value) {
  if (find(name)) throw InvalidArgument("duplicate parameter name '" + name + "'");
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

std::optional<std::size_t> ParamSet::find(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

Tensor& ParamSet::value(const std::string& name) {
  const auto i = find(name);
  if (!i) throw InvalidArgument("no parameter named '" + name + "'");
  return values_[*i];
}

std::size_t ParamSet::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const Tensor& t : values_) n += t.size();
  return n;
}

std::vector<Var> ParamSet::bind(ad::Tape& tape, bool trainable) const {
  std::vector<Var> out;
  out.reserve(values_.size());
  for (const Tensor& t : values_) out.push_back(trainable ? tape.variable(t) : tape.constant(t));
  return out;
}

Var activate(Var x, Activation a) {
  switch (a) {
    case Activation::Identity: return x;
    case Activation::ReLU: return ad::relu(x);
    case Activation::ELU: return ad::elu(x);
  }
  return x;
}

Tensor init_weights(Rng& rng, std::size_t fan_in, std::size_t fan_out, double gain) {
  Tensor w(Shape{fan_in, fan_out});
  const double sd = gain / std::sqrt(static_cast<double>(fan_in));
  for (double& v : w.data()) v = sd * rng.normal();
  return w;
}

ChannelConv ChannelConv::make(ParamSet& ps, Rng& rng, const std::string& name, std::size_t in, std::size_t out,
                              bool with_bias, double gain) {
  ChannelConv c;
  c.in = in;
  c.out = out;
  c.weight = ps.add(name + ".w", init_weights(rng, in, out, gain));
  if (with_bias) c.bias = ps.add(name + ".b", Tensor(Shape{out}, 0.0));
  return c;
}

Var ChannelConv::apply(const Bound& p, Var x) const {
  Var y = ad::linear(x, p[weight]);
  return bias ? ad::add_bias(y, p[*bias]) : y;
}

EquivariantPairLayer EquivariantPairLayer::make(ParamSet& ps, Rng& rng, const std::string& name, std::size_t heads,
                                                Activation act) {
  if (heads == 0) throw InvalidArgument("equivariant layer needs at least one head");
  EquivariantPairLayer l;
  l.heads = heads;
  l.activation = act;
  // Sum terms start at zero: their scale grows with the alignment length.
  Tensor w(Shape{heads, 5}, 0.0);
  for (std::size_t h = 0; h < heads; ++h) {
    w[h * 5 + 0] = rng.normal() / std::sqrt(2.0);
    w[h * 5 + 1] = rng.normal() / std::sqrt(2.0);
  }
  l.weight = ps.add(name + ".w", std::move(w));
  return l;
}

Var EquivariantPairLayer::apply(const Bound& p, Var x) const {
  return activate(ad::equivariant_pair(x, p[weight]), activation);
}

InvariantPairLayer InvariantPairLayer::make(ParamSet& ps, const std::string& name, double w0, double w1) {
  InvariantPairLayer l;
  l.weight = ps.add(name + ".w", Tensor(Shape{2}, std::vector<double>{w0, w1}));
  return l;
}

Var InvariantPairLayer::apply(const Bound& p, Var x) const { return ad::invariant_pair(x, p[weight]); }

SiteSetLayer SiteSetLayer::make(ParamSet& ps, Rng& rng, const std::string& name, std::size_t in, std::size_t out,
                                bool across_rows) {
  SiteSetLayer l;
  l.self = ChannelConv::make(ps, rng, name + ".self", in, out, true);
  l.site_mean = ChannelConv::make(ps, rng, name + ".site_mean", in, out, false, 0.5);
  if (across_rows) {
    l.row_mean = ChannelConv::make(ps, rng, name + ".row_mean", in, out, false, 0.5);
    l.global_mean = ChannelConv::make(ps, rng, name + ".global_mean", in, out, false, 0.5);
  }
  return l;
}

Var SiteSetLayer::apply(const Bound& p, Var x) const {
  const Shape s = x.shape();
  if (s.size() != 3) throw InvalidArgument("site set layer expects [rows, sites, channels]");
  const std::size_t rows = s[0], sites = s[1];
  Var y = self.apply(p, x);
  y = ad::add(y, ad::expand(site_mean.apply(p, ad::reduce(x, 1, true)), 1, sites));
  if (row_mean) {
    Var by_site = ad::reduce(x, 0, true);
    y = ad::add(y, ad::expand(row_mean->apply(p, by_site), 0, rows));
    Var all = global_mean->apply(p, ad::reduce(by_site, 0, true));
    y = ad::add(y, ad::expand(ad::expand(all, 0, sites), 0, rows));
  }
  return ad::elu(y);
}

AttentionBlock AttentionBlock::make(ParamSet& ps, Rng& rng, const std::string& name, std::size_t dim,
                                    std::size_t heads) {
  if (heads == 0 || dim % heads != 0) {
    throw InvalidArgument("attention heads (" + std::to_string(heads) + ") must divide the width (" +
                          std::to_string(dim) + ")");
  }
  AttentionBlock b;
  b.dim = dim;
  b.heads = heads;
  b.wq = ps.add(name + ".q", init_weights(rng, dim, dim));
  b.wk = ps.add(name + ".k", init_weights(rng, dim, dim));
  b.wv = ps.add(name + ".v", init_weights(rng, dim, dim, 0.5));
  return b;
}

Var AttentionBlock::apply(const Bound& p, Var x, std::size_t axis) const { return apply(p, x, axis, nullptr); }

Var AttentionBlock::apply(const Bound& p, Var x, std::size_t axis, Var* weights) const {
  if (x.shape().size() != 3 || x.shape()[2] != dim) {
    throw InvalidArgument("attention expects [batch, items, " + std::to_string(dim) + "], got " +
                          shape_string(x.shape()));
  }
  if (axis > 1) throw InvalidArgument("attention axis must be 0 or 1");
  if (axis == 0) {
    Var t = ad::permute(x, {1, 0, 2});
    return ad::permute(apply(p, t, 1, weights), {1, 0, 2});
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  Var q = ad::linear(x, p[wq]);
  Var k = ad::linear(x, p[wk]);
  Var v = ad::linear(x, p[wv]);
  if (weights) {
    const std::size_t B = x.shape()[0], T = x.shape()[1], dh = dim / heads;
    auto split = [&](Var m) {
      Var r = ad::reshape(m, Shape{B, T, heads, dh});
      return ad::reshape(ad::permute(r, {0, 2, 1, 3}), Shape{B * heads, T, dh});
    };
    *weights = ad::softmax_last(ad::scale(ad::bmm(split(q), split(k), true), scale));
  }
  return ad::add(x, ad::attention(q, k, v, heads, scale));
}

ChannelMLP ChannelMLP::make(ParamSet& ps, Rng& rng, const std::string& name, std::size_t dim, std::size_t hidden) {
  ChannelMLP m;
  m.first = ChannelConv::make(ps, rng, name + ".fc1", dim, hidden);
  m.second = ChannelConv::make(ps, rng, name + ".fc2", hidden, dim, true, 0.5);
  return m;
}

Var ChannelMLP::apply(const Bound& p, Var x) const {
  return ad::add(x, second.apply(p, ad::elu(first.apply(p, x))));
}

AttentionLayer AttentionLayer::make(ParamSet& ps, Rng& rng, const std::string& name, std::size_t dim,
                                    std::size_t heads, bool across_rows) {
  AttentionLayer l;
  l.sites = AttentionBlock::make(ps, rng, name + ".site_attn", dim, heads);
  if (across_rows) l.rows = AttentionBlock::make(ps, rng, name + ".row_attn", dim, heads);
  l.mlp = ChannelMLP::make(ps, rng, name + ".mlp", dim, dim);
  return l;
}

Var AttentionLayer::apply(const Bound& p, Var x) const {
  Var y = sites.apply(p, x, 1);
  if (rows) y = rows->apply(p, y, 0);
  return mlp.apply(p, y);
}

ScalarMLP ScalarMLP::make(ParamSet& ps, Rng& rng, const std::string& name, const std::vector<std::size_t>& widths,
                          Activation hidden, bool softplus_output) {
  if (widths.size() < 2) throw InvalidArgument("scalar MLP needs at least input and output widths");
  ScalarMLP m;
  m.hidden = hidden;
  m.softplus_output = softplus_output;
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    m.layers.push_back(ChannelConv::make(ps, rng, name + ".fc" + std::to_string(k + 1), widths[k], widths[k + 1]));
  }
  return m;
}

Var ScalarMLP::apply(const Bound& p, Var x) const {
  for (std::size_t k = 0; k < layers.size(); ++k) {
    x = layers[k].apply(p, x);
    if (k + 1 < layers.size()) x = activate(x, hidden);
  }
  return softplus_output ? ad::softplus(x) : x;
}

std::vector<std::pair<std::size_t, std::size_t>> pair_indices(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) out.emplace_back(i, j);
  }
  return out;
}

Var make_pairs(Var x, std::size_t n) {
  std::vector<std::size_t> first, second;
  for (const auto& [i, j] : pair_indices(n)) {
    first.push_back(i);
    second.push_back(j);
  }
  return ad::stack({ad::gather(x, first), ad::gather(x, second)}, 1);
}

PairFormation PairFormation::make(ParamSet& ps, Rng& rng, const std::string& name, std::size_t in,
                                  std::size_t heads, std::size_t out) {
  PairFormation f;
  f.mix = EquivariantPairLayer::make(ps, rng, name + ".pair", heads, Activation::ELU);
  f.project = ChannelConv::make(ps, rng, name + ".project", heads * in, out);
  return f;
}

Var PairFormation::apply(const Bound& p, Var x) const {
  const std::size_t n = x.shape()[0];
  Var pairs = mix.apply(p, make_pairs(x, n));
  return project.apply(p, ad::reduce(pairs, 1, false));
}

}  // namespace phylo::net
