#pragma once

#include <array>
#include <optional>
#include <string>

#include "phylo/rng.hpp"

namespace phylo::sim {

using Vec4 = std::array<double, 4>;
using Mat4 = std::array<Vec4, 4>;

enum class ModelKind { JC, K2P, HKY };

std::string to_string(ModelKind k);
/// "jc", "k2p", "hky" (case-insensitive). Throws InvalidArgument.
ModelKind parse_model_kind(const std::string& s);

/// Nucleotide substitution model. JC and K2P are restrictions of HKY.
struct SubstModel {
  ModelKind kind = ModelKind::JC;
  /// Transition/transversion rate ratio (K2P, HKY).
  double kappa = 1.0;
  /// Stationary frequencies A, C, G, T (HKY).
  Vec4 base_freqs{0.25, 0.25, 0.25, 0.25};
  /// Shape of the mean-one Gamma distribution of per-site rates; none means
  /// every site evolves at rate 1.
  std::optional<double> gamma_shape;

  static SubstModel jc();
  static SubstModel k2p(double kappa);
  static SubstModel hky(double kappa, Vec4 freqs);

  /// Throws InvalidArgument on bad parameters.
  void validate() const;
  /// Frequencies actually used (uniform for JC/K2P).
  Vec4 frequencies() const;
  /// Effective kappa (1 for JC).
  double effective_kappa() const;
};

/// True for A<->G and C<->T.
constexpr bool is_transition(int a, int b) noexcept { return a != b && ((a ^ b) == 2); }

/// Generator Q scaled to one expected substitution per unit time at stationarity.
Mat4 rate_matrix(const SubstModel& m);

/// exp(Q t) through the eigendecomposition of the symmetrized reversible
/// generator; computed once per model, evaluated per branch length.
class TransitionKernel {
 public:
  explicit TransitionKernel(const SubstModel& m);

  /// Rows sum to one; entries clamped at zero. P(0) is exactly the identity.
  Mat4 probabilities(double t) const;
  /// One row of P(t), cheaper when only the parent state matters.
  Vec4 row(int from, double t) const;
  const Vec4& frequencies() const noexcept { return freqs_; }

 private:
  Vec4 freqs_;
  Vec4 eigenvalues_;
  Mat4 left_;   // Pi^{-1/2} V
  Mat4 right_;  // V^T Pi^{1/2}
};

/// Dirichlet(alpha, alpha, alpha, alpha) frequencies, used as a surrogate for
/// empirically distributed base compositions.
Vec4 sample_dirichlet_freqs(Rng& rng, double alpha = 5.0);

}  // namespace phylo::sim
