#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "phylo/network.hpp"

namespace phylo::net {

enum class ReferenceTarget { Hamming, JC, K2P };

std::string to_string(ReferenceTarget t);
ReferenceTarget parse_reference_target(const std::string& s);
Architecture architecture_for(ReferenceTarget t);

/// Fixed-weight pair network reproducing an analytic distance on alignments of
/// exactly `sites` columns. Hamming is exact; JC and K2P use fitted scalar maps.
Network build_reference_net(ReferenceTarget target, std::size_t sites);

/// f(x) ~ sum_k slope_k * relu(x - knot_k), with knot_0 = 0 so the fit is 0 at 0.
struct KnotFit {
  std::vector<double> knots;
  std::vector<double> slopes;

  double operator()(double x) const;
};

/// Knots on [0, hi) packed towards a log singularity at `pole` (> hi).
std::vector<double> knots_towards(std::size_t count, double hi, double pole);

/// Least-squares fit of f on a dense grid of [0, hi], sampled with the same warp.
KnotFit fit_knots(const std::function<double(double)>& f, double hi, double pole, std::size_t count);

// Ranges on which the JC and K2P scalar maps are fitted.
inline constexpr double kJcFitMax = 0.7;
inline constexpr double kK2pCombinedMax = 0.8;      // 2P + Q
inline constexpr double kK2pTransversionMax = 0.4;  // Q
inline constexpr std::size_t kReferenceKnots = 128;

/// Knot expansions used by the reference networks (fitted once, then cached).
const KnotFit& jc_scalar_fit();
const KnotFit& k2p_combined_fit();       // -(1/2) ln(1 - u)
const KnotFit& k2p_transversion_fit();   // -(1/4) ln(1 - 2v)

/// Writes the fixed weights of a reference architecture into `net`.
void fill_reference_weights(Network& net);

}  // namespace phylo::net
