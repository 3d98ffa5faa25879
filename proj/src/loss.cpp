#include "phylo/loss.hpp"

#include <cmath>

#include "phylo/error.hpp"

namespace phylo::train {

std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::MAE: return "mae";
    case LossKind::MSE: return "mse";
    case LossKind::L21: return "l21";
    case LossKind::LogDet: return "logdet";
    case LossKind::VonNeumann: return "vonneumann";
  }
  return "?";
}

LossKind parse_loss_kind(const std::string& s) {
  if (s == "mae") return LossKind::MAE;
  if (s == "mse") return LossKind::MSE;
  if (s == "l21") return LossKind::L21;
  if (s == "logdet") return LossKind::LogDet;
  if (s == "vonneumann" || s == "vn") return LossKind::VonNeumann;
  throw InvalidArgument("unknown loss '" + s + "' (expected mae, mse, l21, logdet or vonneumann)");
}

void LossSpec::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("loss gamma must be positive");
}

Var tree_loss(const LossSpec& spec, Var pred, Var target, bool distances) {
  if (pred.shape() != target.shape()) {
    throw InvalidArgument("loss: prediction " + shape_string(pred.shape()) + " vs target " +
                          shape_string(target.shape()));
  }
  switch (spec.kind) {
    case LossKind::MAE:
      return ad::mean(ad::abs(ad::sub(ad::upper_triangle(pred), ad::upper_triangle(target))));
    case LossKind::MSE:
      return ad::mean(ad::square(ad::sub(ad::upper_triangle(pred), ad::upper_triangle(target))));
    case LossKind::L21:
      return ad::sqrt(ad::mean(ad::square(ad::sub(ad::upper_triangle(pred), ad::upper_triangle(target)))));
    case LossKind::LogDet:
    case LossKind::VonNeumann: {
      Var x = distances ? ad::exp(ad::scale(pred, -spec.gamma)) : pred;
      Var y = distances ? ad::exp(ad::scale(target, -spec.gamma)) : target;
      return spec.kind == LossKind::LogDet ? ad::logdet_divergence(x, y) : ad::vonneumann_divergence(x, y);
    }
  }
  throw InvalidArgument("unhandled loss kind");
}

double batch_weight(const LossSpec& spec, std::size_t count) {
  if (count == 0) throw InvalidArgument("batch_loss: empty batch");
  return spec.kind == LossKind::L21 ? 1.0 : 1.0 / static_cast<double>(count);
}

Var batch_loss(const LossSpec& spec, const std::vector<Var>& per_tree) {
  const double w = batch_weight(spec, per_tree.size());
  Var total = per_tree.size() == 1 ? per_tree[0] : ad::sum(ad::stack(per_tree, 0));
  return w == 1.0 ? total : ad::scale(total, w);
}

double loss_value(const LossSpec& spec, const Tensor& pred, const Tensor& target, bool distances) {
  ad::Tape tape;
  return tree_loss(spec, tape.constant(pred), tape.constant(target), distances).value()[0];
}

}  // namespace phylo::train
