#include "phylo/distance.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <exception>
#include <utility>
#include <vector>

#include "phylo/error.hpp"
#include "phylo/subst.hpp"

namespace phylo::dist {

void SaturationPolicy::validate() const {
  if (!(ceiling > 0.0) || !std::isfinite(ceiling)) throw InvalidArgument("saturation ceiling must be positive and finite");
}

namespace {
void check_pair(Sequence x, Sequence y) {
  if (x.size() != y.size()) throw InvalidArgument("sequences differ in length");
  if (x.empty()) throw InvalidArgument("sequences are empty");
}

double saturated(const SaturationPolicy& policy, const char* what) {
  if (policy.mode == SaturationPolicy::Mode::Error) {
    throw NumericError(std::string(what) + " distance saturated");
  }
  return policy.ceiling;
}
}  // namespace

double d_hamming(Sequence x, Sequence y) {
  check_pair(x, y);
  std::size_t diff = 0;
  for (std::size_t i = 0; i < x.size(); ++i) diff += x[i] != y[i];
  return static_cast<double>(diff) / static_cast<double>(x.size());
}

double jc_correction(double p, const SaturationPolicy& policy) {
  if (p >= 0.75) return saturated(policy, "JC");
  const double d = -0.75 * std::log1p(-4.0 * p / 3.0);
  return policy.mode == SaturationPolicy::Mode::Ceiling ? std::min(d, policy.ceiling) : d;
}

double d_jc(Sequence x, Sequence y, const SaturationPolicy& policy) {
  return jc_correction(d_hamming(x, y), policy);
}

K2PFractions k2p_fractions(Sequence x, Sequence y) {
  check_pair(x, y);
  std::size_t ts = 0, tv = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == y[i]) continue;
    if (sim::is_transition(x[i], y[i])) {
      ++ts;
    } else {
      ++tv;
    }
  }
  const double l = static_cast<double>(x.size());
  return {static_cast<double>(ts) / l, static_cast<double>(tv) / l};
}

double k2p_correction(double p, double q, const SaturationPolicy& policy) {
  const double a = 1.0 - 2.0 * p - q;
  const double b = 1.0 - 2.0 * q;
  if (a <= 0.0 || b <= 0.0) return saturated(policy, "K2P");
  const double d = -0.5 * std::log(a) - 0.25 * std::log(b);
  return policy.mode == SaturationPolicy::Mode::Ceiling ? std::min(d, policy.ceiling) : d;
}

double d_k2p(Sequence x, Sequence y, const SaturationPolicy& policy) {
  const K2PFractions f = k2p_fractions(x, y);
  return k2p_correction(f.transitions, f.transversions, policy);
}

std::string to_string(DistanceKind k) {
  switch (k) {
    case DistanceKind::Hamming: return "hamming";
    case DistanceKind::JC: return "jc";
    case DistanceKind::K2P: return "k2p";
  }
  return "?";
}

DistanceKind parse_distance_kind(const std::string& s) {
  std::string l = s;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
  if (l == "hamming" || l == "h" || l == "dh") return DistanceKind::Hamming;
  if (l == "jc" || l == "djc") return DistanceKind::JC;
  if (l == "k2p" || l == "dk2p") return DistanceKind::K2P;
  throw InvalidArgument("unknown distance '" + s + "' (expected hamming, jc or k2p)");
}

double pair_distance(DistanceKind kind, Sequence x, Sequence y, const SaturationPolicy& policy) {
  switch (kind) {
    case DistanceKind::Hamming: return d_hamming(x, y);
    case DistanceKind::JC: return d_jc(x, y, policy);
    case DistanceKind::K2P: return d_k2p(x, y, policy);
  }
  return 0.0;
}

namespace {

std::vector<std::pair<std::size_t, std::size_t>> all_pairs(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  }
  return pairs;
}

void prepare(const Alignment& a, const SaturationPolicy& policy) {
  if (a.taxa() < 3) throw InvalidArgument("distance_matrix needs at least 3 taxa");
  policy.validate();
}

// Wraps a pairwise failure with the names of the pair.
[[noreturn]] void rethrow_for_pair(const Alignment& a, std::size_t i, std::size_t j, std::exception_ptr err) {
  const std::string where = " (pair " + a.labels()[i] + ", " + a.labels()[j] + ")";
  try {
    std::rethrow_exception(err);
  } catch (const NumericError& e) {
    throw NumericError(e.what() + where);
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(e.what() + where);
  }
}

}  // namespace

DistanceMatrix distance_matrix(const Alignment& a, DistanceKind kind, const SaturationPolicy& policy) {
  prepare(a, policy);
  const auto pairs = all_pairs(a.taxa());
  SquareMatrix m(a.labels());
  std::vector<std::exception_ptr> errors(pairs.size());
  const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t k = 0; k < count; ++k) {
    const auto [i, j] = pairs[k];
    try {
      const double d = pair_distance(kind, a.row(i), a.row(j), policy);
      m(i, j) = d;
      m(j, i) = d;
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  // Report the first failing pair in canonical order regardless of scheduling.
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (errors[k]) rethrow_for_pair(a, pairs[k].first, pairs[k].second, errors[k]);
  }
  return DistanceMatrix(std::move(m));
}

namespace serial {
DistanceMatrix distance_matrix(const Alignment& a, DistanceKind kind, const SaturationPolicy& policy) {
  prepare(a, policy);
  SquareMatrix m(a.labels());
  for (const auto& [i, j] : all_pairs(a.taxa())) {
    double d = 0.0;
    try {
      d = pair_distance(kind, a.row(i), a.row(j), policy);
    } catch (...) {
      rethrow_for_pair(a, i, j, std::current_exception());
    }
    m(i, j) = d;
    m(j, i) = d;
  }
  return DistanceMatrix(std::move(m));
}
}  // namespace serial

}  // namespace phylo::dist
