#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "phylo/alignment.hpp"
#include "phylo/matrix.hpp"

namespace phylo::dist {

/// What to do when a correction formula leaves its domain.
struct SaturationPolicy {
  enum class Mode { Ceiling, Error };
  Mode mode = Mode::Ceiling;
  double ceiling = 5.0;

  static SaturationPolicy capped(double value) { return {Mode::Ceiling, value}; }
  static SaturationPolicy error() { return {Mode::Error, 5.0}; }
  void validate() const;
};

using Sequence = std::span<const std::uint8_t>;

/// Fraction of mismatching sites. Throws InvalidArgument on length mismatch or
/// empty input.
double d_hamming(Sequence x, Sequence y);

/// -3/4 ln(1 - 4p/3). For p >= 3/4 the policy applies; in Ceiling mode the
/// result is also capped at the ceiling below saturation, so the estimator
/// stays monotone in p. Error mode throws NumericError at saturation.
double jc_correction(double p, const SaturationPolicy& policy = {});
double d_jc(Sequence x, Sequence y, const SaturationPolicy& policy = {});

struct K2PFractions {
  double transitions = 0.0;    ///< P: A<->G, C<->T
  double transversions = 0.0;  ///< Q: every other mismatch
};
K2PFractions k2p_fractions(Sequence x, Sequence y);

/// -1/2 ln(1 - 2P - Q) - 1/4 ln(1 - 2Q); policy applies when either log
/// argument is <= 0 (and caps as for jc_correction).
double k2p_correction(double transitions, double transversions, const SaturationPolicy& policy = {});
double d_k2p(Sequence x, Sequence y, const SaturationPolicy& policy = {});

enum class DistanceKind { Hamming, JC, K2P };
std::string to_string(DistanceKind k);
DistanceKind parse_distance_kind(const std::string& s);

double pair_distance(DistanceKind kind, Sequence x, Sequence y, const SaturationPolicy& policy);

/// All pairwise distances; parallel over pairs, output independent of the
/// thread count. Errors name the offending pair. Requires at least 3 taxa.
DistanceMatrix distance_matrix(const Alignment& a, DistanceKind kind, const SaturationPolicy& policy = {});

namespace serial {
DistanceMatrix distance_matrix(const Alignment& a, DistanceKind kind, const SaturationPolicy& policy = {});
}  // namespace serial

}  // namespace phylo::dist
