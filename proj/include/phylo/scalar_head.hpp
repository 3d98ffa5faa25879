#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "phylo/layers.hpp"
#include "phylo/optim.hpp"

namespace phylo::train {

struct ScalarHeadConfig {
  std::vector<std::size_t> hidden = {12, 12, 12, 12, 12};  ///< ELU layers between input 1 and output 1
  std::size_t steps = 6000;                                 ///< full-batch Adam steps
  double learning_rate = 0.01;                              ///< cosine-decayed to 0 over `steps`
  std::uint64_t seed = 1;
};

/// Scalar-to-scalar ELU MLP.
class ScalarHead {
 public:
  ScalarHead(const std::vector<std::size_t>& hidden, std::uint64_t seed);

  double operator()(double x) const;
  std::vector<double> operator()(const std::vector<double>& xs) const;

  std::size_t parameter_count() const noexcept { return params_.scalar_count(); }
  std::size_t layer_count() const noexcept { return mlp_.layers.size(); }
  net::ParamSet& params() noexcept { return params_; }
  const net::ParamSet& params() const noexcept { return params_; }
  const net::ScalarMLP& mlp() const noexcept { return mlp_; }

 private:
  net::ParamSet params_;
  net::ScalarMLP mlp_;
};

struct ScalarFitReport {
  double final_loss = 0.0;  ///< mean absolute error on the samples
  std::size_t steps = 0;
};

/// Fits a ScalarHead to (x, y) samples by minimizing the mean absolute error.
/// Throws InvalidArgument for fewer than two distinct x values or non-finite data.
ScalarHead fit_scalar_head(const std::vector<double>& xs, const std::vector<double>& ys,
                           const ScalarHeadConfig& cfg = {}, ScalarFitReport* report = nullptr);

}  // namespace phylo::train
