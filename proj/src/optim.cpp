#include "phylo/optim.hpp"

#include <cmath>
#include <numbers>

#include "phylo/error.hpp"

namespace phylo::train {

void AdamConfig::validate() const {
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw InvalidArgument("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw InvalidArgument("Adam epsilon must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw InvalidArgument("learning rate must be positive");
}

double cosine_lr(double lr0, std::size_t step, std::size_t horizon) {
  if (horizon == 0 || step >= horizon) return step == 0 && horizon == 0 ? lr0 : 0.0;
  const double frac = static_cast<double>(step) / static_cast<double>(horizon);
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

Adam::Adam(const net::ParamSet& params, AdamConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_.emplace_back(params.value(i).shape(), 0.0);
    v_.emplace_back(params.value(i).shape(), 0.0);
  }
}

void Adam::step(net::ParamSet& params, const std::vector<Tensor>& grads, double lr) {
  if (grads.size() != params.size()) throw InvalidArgument("Adam: gradient count does not match parameters");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& w = params.value(i);
    const Tensor& g = grads[i];
    if (g.shape() != w.shape()) throw InvalidArgument("Adam: gradient shape mismatch for " + params.name(i));
    for (std::size_t k = 0; k < w.size(); ++k) {
      m_[i][k] = cfg_.beta1 * m_[i][k] + (1.0 - cfg_.beta1) * g[k];
      v_[i][k] = cfg_.beta2 * v_[i][k] + (1.0 - cfg_.beta2) * g[k] * g[k];
      const double mhat = m_[i][k] / c1;
      const double vhat = v_[i][k] / c2;
      w[k] -= lr * mhat / (std::sqrt(vhat) + cfg_.epsilon);
    }
  }
}

double parameter_norm(const net::ParamSet& params) {
  double s = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (double v : params.value(i).data()) s += v * v;
  }
  return std::sqrt(s);
}

}  // namespace phylo::train
