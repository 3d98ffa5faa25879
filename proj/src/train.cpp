#include "phylo/train.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>

#include "phylo/error.hpp"
#include "phylo/io_util.hpp"
#include "phylo/matrix.hpp"
#include "phylo/splits.hpp"

namespace phylo::train {

namespace {

Tensor matrix_tensor(const SquareMatrix& m, const std::vector<std::string>& labels) {
  const std::size_t n = labels.size();
  Tensor t(Shape{n, n});
  std::vector<std::size_t> at(n);
  for (std::size_t i = 0; i < n; ++i) at[i] = m.index_of(labels[i]);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) t[i * n + j] = m(at[i], at[j]);
  }
  return t;
}

}  // namespace

Example make_example(PhyloTree tree, const Alignment& alignment) {
  std::vector<std::size_t> order(alignment.taxa());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return alignment.labels()[a] < alignment.labels()[b]; });
  Example ex{std::move(tree), alignment.permuted_rows(order), {}, {}, {}};
  const auto& labels = ex.alignment.labels();
  ex.one_hot = ex.alignment.one_hot();
  ex.distances = matrix_tensor(patristic_matrix(ex.tree), labels);
  ex.covariance = matrix_tensor(covariance_matrix(ex.tree), labels);
  return ex;
}

std::vector<Example> simulate_examples(const DataConfig& cfg, const std::string& stream, std::size_t count) {
  cfg.tree.validate();
  cfg.model.validate();
  if (cfg.sites == 0) throw InvalidArgument("alignment length must be positive");
  std::vector<std::optional<Example>> out(count);
  std::vector<std::exception_ptr> errors(count);
  const Rng root = Rng(cfg.seed).substream(stream);
  const auto total = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < total; ++i) {
    try {
      Rng r = root.substream("instance", static_cast<std::uint64_t>(i));
      const std::uint64_t tree_seed = r.next_u64();
      const std::uint64_t seq_seed = r.next_u64();
      PhyloTree t = sim::simulate_bd_tree(cfg.tree, tree_seed);
      const Alignment a = sim::evolve_alignment(t, cfg.model, cfg.sites, seq_seed);
      out[i] = make_example(std::move(t), a);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<Example> result;
  result.reserve(count);
  for (auto& e : out) result.push_back(std::move(*e));
  return result;
}

void TrainConfig::validate() const {
  adam.validate();
  loss.validate();
  if (batch_size == 0) throw InvalidArgument("batch size must be positive");
  if (max_epochs == 0) throw InvalidArgument("max epochs must be positive");
}

double validation_rf(const net::Network& net, const std::vector<Example>& set, nj::Variant builder) {
  if (set.empty()) return 0.0;
  std::vector<double> rf(set.size());
  std::vector<std::exception_ptr> errors(set.size());
  const auto total = static_cast<std::ptrdiff_t>(set.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < total; ++i) {
    try {
      const PhyloTree est = nj::build_tree(net.predict(set[i].alignment), builder);
      rf[i] = rf_distance(est, set[i].tree);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return pairwise_sum(rf.data(), rf.size()) / static_cast<double>(rf.size());
}

double loss_and_gradients(const net::Network& net, const std::vector<const Example*>& batch, const LossSpec& loss,
                          std::vector<Tensor>* grads) {
  // One tape per alignment: the batch loss is a weighted sum of tree losses, so
  // gradients combine with the same weights while only one graph is alive.
  const double w = batch_weight(loss, batch.size());
  const bool gram_target = net.spec().head == net::Head::InnerProduct;
  if (grads) {
    grads->clear();
    for (std::size_t i = 0; i < net.params().size(); ++i) grads->emplace_back(net.params().value(i).shape());
  }
  double total = 0.0;
  for (const Example* ex : batch) {
    ad::Tape tape;
    const net::Bound p = net.params().bind(tape, grads != nullptr);
    const net::Network::Output out = net.forward(p, tape.constant(ex->one_hot));
    const Var tree = gram_target ? tree_loss(loss, out.gram, tape.constant(ex->covariance), false)
                                 : tree_loss(loss, out.matrix, tape.constant(ex->distances), true);
    const double value = tree.value()[0];
    total += w * value;
    if (!grads || !std::isfinite(total)) continue;
    tape.backward(tree);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const Tensor g = tape.gradient(p[i]);
      double* acc = (*grads)[i].data().data();
      for (std::size_t e = 0; e < g.size(); ++e) acc[e] += w * g[e];
    }
  }
  return total;
}

TrainResult fit(net::Network& net, const std::vector<Example>& train_set, const std::vector<Example>& validation_set,
                const TrainConfig& cfg, std::size_t start_epoch,
                const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw InvalidArgument("empty training set");
  const std::size_t batches = (train_set.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t horizon = cfg.horizon ? cfg.horizon : cfg.max_epochs * batches;
  Adam adam(net.params(), cfg.adam);
  std::size_t step = start_epoch * batches;

  TrainResult result;
  net::ParamSet best = net.params();
  std::size_t since_best = 0;
  if (start_epoch > 0) {
    // A resumed run starts from the best weights so far; they stay the incumbent.
    result.best_epoch = start_epoch;
    result.best_validation_rf = validation_rf(net, validation_set, cfg.validation_builder);
  }
  const Rng shuffle_root = Rng(cfg.seed).substream("shuffle");

  for (std::size_t epoch = start_epoch + 1; epoch <= cfg.max_epochs; ++epoch) {
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle = shuffle_root.substream("epoch", epoch);
    std::shuffle(order.begin(), order.end(), shuffle);

    std::vector<double> losses;
    double lr = cosine_lr(cfg.adam.learning_rate, step, horizon);
    for (std::size_t b = 0; b < batches; ++b) {
      std::vector<const Example*> batch;
      for (std::size_t k = b * cfg.batch_size; k < std::min(train_set.size(), (b + 1) * cfg.batch_size); ++k) {
        batch.push_back(&train_set[order[k]]);
      }
      std::vector<Tensor> grads;
      const double value = loss_and_gradients(net, batch, cfg.loss, &grads);
      if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "non-finite training loss at epoch " << epoch << ", batch " << b + 1 << " (parameter norm "
            << parameter_norm(net.params()) << ")";
        throw NumericError(msg.str());
      }
      lr = cosine_lr(cfg.adam.learning_rate, step, horizon);
      adam.step(net.params(), grads, lr);
      ++step;
      losses.push_back(value);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = pairwise_sum(losses.data(), losses.size()) / static_cast<double>(losses.size());
    rec.validation_rf = validation_rf(net, validation_set, cfg.validation_builder);
    rec.learning_rate = lr;
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (result.best_epoch == 0 || rec.validation_rf < result.best_validation_rf) {
      result.best_epoch = epoch;
      result.best_validation_rf = rec.validation_rf;
      best = net.params();
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      result.stopped_early = true;
      break;
    }
  }
  net.params() = best;
  return result;
}

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << "epoch,train_loss,val_rf,lr\n";
  out.precision(17);
  for (const EpochRecord& r : history) {
    out << r.epoch << "," << r.train_loss << "," << r.validation_rf << "," << r.learning_rate << "\n";
  }
}

void write_history_file(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
  std::ostringstream s;
  write_history_csv(s, history);
  write_file_atomic(path, s.str());
}

}  // namespace phylo::train
