#pragma once

#include <cstddef>
#include <vector>

#include "phylo/layers.hpp"

namespace phylo::train {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double learning_rate = 0.01;

  void validate() const;
};

/// lr0 * (1 + cos(pi * step / horizon)) / 2, held at 0 after the horizon.
double cosine_lr(double lr0, std::size_t step, std::size_t horizon);

/// Adam over every tensor of a ParamSet.
class Adam {
 public:
  Adam(const net::ParamSet& params, AdamConfig cfg);

  /// One update; grads[i] matches params.value(i) in shape.
  void step(net::ParamSet& params, const std::vector<Tensor>& grads, double lr);
  std::size_t steps() const noexcept { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<Tensor> m_, v_;
  std::size_t t_ = 0;
};

/// Euclidean norm of all parameters together.
double parameter_norm(const net::ParamSet& params);

}  // namespace phylo::train
