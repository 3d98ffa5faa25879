#include "phylo/reference_nets.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "phylo/error.hpp"

namespace phylo::net {

std::string to_string(ReferenceTarget t) {
  switch (t) {
    case ReferenceTarget::Hamming: return "hamming";
    case ReferenceTarget::JC: return "jc";
    case ReferenceTarget::K2P: return "k2p";
  }
  return "?";
}

ReferenceTarget parse_reference_target(const std::string& s) {
  if (s == "hamming" || s == "H" || s == "h") return ReferenceTarget::Hamming;
  if (s == "jc" || s == "JC") return ReferenceTarget::JC;
  if (s == "k2p" || s == "K2P") return ReferenceTarget::K2P;
  throw InvalidArgument("unknown reference target '" + s + "' (expected hamming, jc or k2p)");
}

Architecture architecture_for(ReferenceTarget t) {
  switch (t) {
    case ReferenceTarget::Hamming: return Architecture::ReferenceHamming;
    case ReferenceTarget::JC: return Architecture::ReferenceJC;
    case ReferenceTarget::K2P: return Architecture::ReferenceK2P;
  }
  return Architecture::ReferenceHamming;
}

double KnotFit::operator()(double x) const {
  double y = 0.0;
  for (std::size_t k = 0; k < knots.size(); ++k) {
    if (x > knots[k]) y += slopes[k] * (x - knots[k]);
  }
  return y;
}

std::vector<double> knots_towards(std::size_t count, double hi, double pole) {
  if (count == 0 || !(hi > 0.0) || !(pole > hi)) throw InvalidArgument("knots_towards: need 0 < hi < pole");
  // Uniform in -log(1 - x/pole), which evens out the curvature of a log pole.
  const double top = -std::log1p(-hi / pole);
  std::vector<double> t(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double s = top * static_cast<double>(k) / static_cast<double>(count);
    t[k] = -pole * std::expm1(-s);
  }
  return t;
}

KnotFit fit_knots(const std::function<double(double)>& f, double hi, double pole, std::size_t count) {
  KnotFit fit;
  fit.knots = knots_towards(count, hi, pole);
  const std::size_t samples = 24 * count + 1;
  const std::vector<double> xs = [&] {
    std::vector<double> x = knots_towards(samples - 1, hi, pole);
    x.push_back(hi);
    return x;
  }();
  Eigen::MatrixXd A(samples, count);
  Eigen::VectorXd b(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    for (std::size_t k = 0; k < count; ++k) A(i, k) = std::max(xs[i] - fit.knots[k], 0.0);
    b(i) = f(xs[i]);
  }
  const Eigen::VectorXd a = A.colPivHouseholderQr().solve(b);
  fit.slopes.assign(a.data(), a.data() + a.size());
  return fit;
}

const KnotFit& jc_scalar_fit() {
  static const KnotFit fit =
      fit_knots([](double z) { return -0.75 * std::log1p(-4.0 * z / 3.0); }, kJcFitMax, 0.75, kReferenceKnots);
  return fit;
}

const KnotFit& k2p_combined_fit() {
  static const KnotFit fit =
      fit_knots([](double u) { return -0.5 * std::log1p(-u); }, kK2pCombinedMax, 1.0, kReferenceKnots);
  return fit;
}

const KnotFit& k2p_transversion_fit() {
  static const KnotFit fit =
      fit_knots([](double v) { return -0.25 * std::log1p(-2.0 * v); }, kK2pTransversionMax, 0.5, kReferenceKnots);
  return fit;
}

namespace {

void set(ParamSet& ps, std::size_t index, std::vector<double> values) {
  Tensor& t = ps.value(index);
  if (t.size() != values.size()) throw InvalidArgument("reference weight size mismatch for " + ps.name(index));
  std::copy(values.begin(), values.end(), t.data().begin());
}

// Scalar layer [1 -> K] with the knots as negative biases, then [K -> 1] slopes.
void set_knot_layers(ParamSet& ps, const ChannelConv& expand, const ChannelConv& combine,
                     const std::vector<const KnotFit*>& fits) {
  std::size_t total = 0;
  for (const KnotFit* f : fits) total += f->knots.size();
  std::vector<double> w(expand.in * total, 0.0), b(total), a(total);
  std::size_t col = 0;
  for (std::size_t input = 0; input < fits.size(); ++input) {
    for (std::size_t k = 0; k < fits[input]->knots.size(); ++k, ++col) {
      w[input * total + col] = 1.0;
      b[col] = -fits[input]->knots[k];
      a[col] = fits[input]->slopes[k];
    }
  }
  set(ps, expand.weight, w);
  set(ps, *expand.bias, b);
  set(ps, combine.weight, a);
  set(ps, *combine.bias, {0.0});
}

}  // namespace

void fill_reference_weights(Network& net) {
  const NetworkSpec& spec = net.spec();
  if (!is_reference(spec.architecture)) throw InvalidArgument("not a reference architecture");
  ParamSet& ps = net.params();
  const auto& ly = net.layers();
  const double L = static_cast<double>(spec.sites);
  // Mismatching sites become one-hot indicators of the own state in each block.
  set(ps, ly.ref_first->weight, {1.0, -1.0, 0.0, 0.0, 0.0});
  const ScalarMLP& g = *ly.scalar;

  switch (spec.architecture) {
    case Architecture::ReferenceHamming:
      set(ps, ly.ref_second->weight, {0.5, 0.0, 0.0, 0.0, 0.0});
      set(ps, ly.ref_pool->weight, {1.0 / L, 0.0});
      set(ps, g.layers[0].weight, {1.0, 1.0, 1.0, 1.0});
      set(ps, *g.layers[0].bias, {0.0});
      break;
    case Architecture::ReferenceJC:
      set(ps, ly.ref_second->weight, {0.5, 0.0, 0.0, 0.0, 0.0});
      set(ps, ly.ref_pool->weight, {1.0 / L, 0.0});
      set(ps, g.layers[0].weight, {1.0, 1.0, 1.0, 1.0});
      set(ps, *g.layers[0].bias, {0.0});
      set_knot_layers(ps, g.layers[1], g.layers[2], {&jc_scalar_fit()});
      break;
    case Architecture::ReferenceK2P:
      // Both blocks now hold e_a + e_b at a mismatch.
      set(ps, ly.ref_second->weight, {1.0, 1.0, 0.0, 0.0, 0.0});
      // Channels A,C,G,T -> [purine transition, pyrimidine transition, mismatch].
      set(ps, ly.ref_classes->weight, {1.0, 0.0, 0.5, 0.0, 1.0, 0.5, 1.0, 0.0, 0.5, 0.0, 1.0, 0.5});
      set(ps, *ly.ref_classes->bias, {-1.0, -1.0, 0.0});
      // -> [transitions, transversions]
      set(ps, ly.ref_counts->weight, {1.0, -1.0, 1.0, -1.0, 0.0, 1.0});
      set(ps, *ly.ref_counts->bias, {0.0, 0.0});
      set(ps, ly.ref_pool->weight, {1.0 / (2.0 * L), 0.0});
      // (P, Q) -> (2P + Q, Q)
      set(ps, g.layers[0].weight, {2.0, 0.0, 1.0, 1.0});
      set(ps, *g.layers[0].bias, {0.0, 0.0});
      set_knot_layers(ps, g.layers[1], g.layers[2], {&k2p_combined_fit(), &k2p_transversion_fit()});
      break;
    default:
      break;
  }
}

Network build_reference_net(ReferenceTarget target, std::size_t sites) {
  if (sites == 0) throw InvalidArgument("reference network needs a positive alignment length");
  NetworkSpec spec;
  spec.architecture = architecture_for(target);
  spec.sites = sites;
  return Network(spec, 0);
}

}  // namespace phylo::net
