#include "phylo/scalar_head.hpp"

#include <algorithm>
#include <cmath>

#include "phylo/error.hpp"

namespace phylo::train {

using ad::Var;

ScalarHead::ScalarHead(const std::vector<std::size_t>& hidden, std::uint64_t seed) {
  std::vector<std::size_t> widths{1};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(1);
  Rng rng = Rng(seed).substream("scalar-head");
  mlp_ = net::ScalarMLP::make(params_, rng, "head", widths, net::Activation::ELU, false);
}

std::vector<double> ScalarHead::operator()(const std::vector<double>& xs) const {
  if (xs.empty()) return {};
  ad::Tape tape;
  const net::Bound p = params_.bind(tape, false);
  Var y = mlp_.apply(p, tape.constant(Tensor(Shape{xs.size(), 1}, xs)));
  const auto d = y.value().data();
  return {d.begin(), d.end()};
}

double ScalarHead::operator()(double x) const { return (*this)(std::vector<double>{x})[0]; }

ScalarHead fit_scalar_head(const std::vector<double>& xs, const std::vector<double>& ys, const ScalarHeadConfig& cfg,
                           ScalarFitReport* report) {
  if (xs.size() != ys.size()) throw InvalidArgument("fit_scalar_head: x and y differ in length");
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) throw InvalidArgument("fit_scalar_head: non-finite sample");
  }
  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  if (xs.size() < 2 || *lo == *hi) throw InvalidArgument("fit_scalar_head: need at least two distinct x values");
  if (cfg.steps == 0) throw InvalidArgument("fit_scalar_head: steps must be positive");

  ScalarHead head(cfg.hidden, cfg.seed);
  AdamConfig adam_cfg;
  adam_cfg.learning_rate = cfg.learning_rate;
  Adam adam(head.params(), adam_cfg);
  const Tensor x(Shape{xs.size(), 1}, xs);
  const Tensor y(Shape{ys.size(), 1}, ys);
  double loss = 0.0;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    ad::Tape tape;
    const net::Bound p = head.params().bind(tape, true);
    Var out = head.mlp().apply(p, tape.constant(x));
    Var l = ad::mean(ad::abs(ad::sub(out, tape.constant(y))));
    loss = l.value()[0];
    if (!std::isfinite(loss)) throw NumericError("fit_scalar_head: non-finite loss at step " + std::to_string(step));
    tape.backward(l);
    std::vector<Tensor> grads;
    for (const Var& v : p) grads.push_back(tape.gradient(v));
    adam.step(head.params(), grads, cosine_lr(cfg.learning_rate, step, cfg.steps));
  }
  if (report) {
    report->steps = cfg.steps;
    const std::vector<double> pred = head(xs);
    double s = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) s += std::abs(pred[i] - ys[i]);
    report->final_loss = s / static_cast<double>(xs.size());
  }
  return head;
}

}  // namespace phylo::train
