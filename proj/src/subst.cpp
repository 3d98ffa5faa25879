#include "phylo/subst.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cctype>
#include <cmath>

#include "phylo/error.hpp"

namespace phylo::sim {

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::JC: return "jc";
    case ModelKind::K2P: return "k2p";
    case ModelKind::HKY: return "hky";
  }
  return "?";
}

ModelKind parse_model_kind(const std::string& s) {
  std::string l = s;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
  if (l == "jc") return ModelKind::JC;
  if (l == "k2p") return ModelKind::K2P;
  if (l == "hky") return ModelKind::HKY;
  throw InvalidArgument("unknown substitution model '" + s + "' (expected jc, k2p or hky)");
}

SubstModel SubstModel::jc() { return SubstModel{}; }

SubstModel SubstModel::k2p(double kappa) {
  SubstModel m;
  m.kind = ModelKind::K2P;
  m.kappa = kappa;
  return m;
}

SubstModel SubstModel::hky(double kappa, Vec4 freqs) {
  SubstModel m;
  m.kind = ModelKind::HKY;
  m.kappa = kappa;
  m.base_freqs = freqs;
  return m;
}

void SubstModel::validate() const {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw InvalidArgument("kappa must be positive");
  if (kind == ModelKind::HKY) {
    double sum = 0.0;
    for (double f : base_freqs) {
      if (!(f > 0.0)) throw InvalidArgument("base frequencies must be positive");
      sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw InvalidArgument("base frequencies must sum to 1");
  }
  if (gamma_shape && !(*gamma_shape > 0.0 && std::isfinite(*gamma_shape))) {
    throw InvalidArgument("gamma shape must be positive");
  }
}

Vec4 SubstModel::frequencies() const {
  return kind == ModelKind::HKY ? base_freqs : Vec4{0.25, 0.25, 0.25, 0.25};
}

double SubstModel::effective_kappa() const { return kind == ModelKind::JC ? 1.0 : kappa; }

Mat4 rate_matrix(const SubstModel& m) {
  m.validate();
  const Vec4 pi = m.frequencies();
  const double kappa = m.effective_kappa();
  Mat4 q{};
  for (int i = 0; i < 4; ++i) {
    double row = 0.0;
    for (int j = 0; j < 4; ++j) {
      if (i == j) continue;
      q[i][j] = (is_transition(i, j) ? kappa : 1.0) * pi[j];
      row += q[i][j];
    }
    q[i][i] = -row;
  }
  double rate = 0.0;
  for (int i = 0; i < 4; ++i) rate -= pi[i] * q[i][i];
  for (auto& r : q) {
    for (double& v : r) v /= rate;
  }
  return q;
}

TransitionKernel::TransitionKernel(const SubstModel& m) : freqs_(m.frequencies()) {
  const Mat4 q = rate_matrix(m);
  Eigen::Matrix4d sym;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) sym(i, j) = std::sqrt(freqs_[i]) * q[i][j] / std::sqrt(freqs_[j]);
  }
  // Reversibility makes sym symmetric up to rounding; average the halves.
  sym = 0.5 * (sym + sym.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(sym);
  const Eigen::Matrix4d& v = es.eigenvectors();
  for (int k = 0; k < 4; ++k) eigenvalues_[k] = es.eigenvalues()(k);
  for (int i = 0; i < 4; ++i) {
    for (int k = 0; k < 4; ++k) {
      left_[i][k] = v(i, k) / std::sqrt(freqs_[i]);
      right_[k][i] = v(i, k) * std::sqrt(freqs_[i]);
    }
  }
}

Vec4 TransitionKernel::row(int from, double t) const {
  Vec4 out{};
  if (t == 0.0) {
    out[from] = 1.0;
    return out;
  }
  Vec4 scaled;
  for (int k = 0; k < 4; ++k) scaled[k] = left_[from][k] * std::exp(eigenvalues_[k] * t);
  double sum = 0.0;
  for (int j = 0; j < 4; ++j) {
    double p = 0.0;
    for (int k = 0; k < 4; ++k) p += scaled[k] * right_[k][j];
    out[j] = std::max(p, 0.0);
    sum += out[j];
  }
  for (double& p : out) p /= sum;
  return out;
}

Mat4 TransitionKernel::probabilities(double t) const {
  Mat4 p;
  for (int i = 0; i < 4; ++i) p[i] = row(i, t);
  return p;
}

Vec4 sample_dirichlet_freqs(Rng& rng, double alpha) {
  Vec4 f;
  double sum = 0.0;
  for (double& x : f) {
    x = rng.gamma(alpha, 1.0);
    sum += x;
  }
  for (double& x : f) x /= sum;
  return f;
}

}  // namespace phylo::sim
