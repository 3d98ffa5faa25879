#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "phylo/alignment.hpp"
#include "phylo/loss.hpp"
#include "phylo/network.hpp"
#include "phylo/nj.hpp"
#include "phylo/optim.hpp"
#include "phylo/simulate.hpp"
#include "phylo/tree.hpp"

namespace phylo::train {

/// One simulated instance, rows sorted by label.
struct Example {
  PhyloTree tree;
  Alignment alignment;
  Tensor one_hot;     ///< [n,L,4]
  Tensor distances;   ///< [n,n] patristic
  Tensor covariance;  ///< [n,n] shared root-path lengths
};

/// Sorts rows by label and precomputes tensors and targets.
Example make_example(PhyloTree tree, const Alignment& alignment);

struct DataConfig {
  sim::BDParams tree;
  sim::SubstModel model = sim::SubstModel::jc();
  std::size_t sites = 500;
  std::uint64_t seed = 1;
};

/// `count` instances from the named stream; instance i depends only on
/// (seed, stream, i). Generated in parallel.
std::vector<Example> simulate_examples(const DataConfig& cfg, const std::string& stream, std::size_t count);

struct TrainConfig {
  AdamConfig adam;
  std::size_t horizon = 0;  ///< cosine decay length in steps; 0 means the whole run
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  std::size_t batch_size = 4;
  std::uint64_t seed = 1;
  LossSpec loss;
  nj::Variant validation_builder = nj::Variant::NJ;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_rf = 0.0;
  double learning_rate = 0.0;  ///< rate at the last step of the epoch
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_validation_rf = 1.0;
  bool stopped_early = false;
};

/// Mean RF distance between NJ on the network's output and the true trees.
double validation_rf(const net::Network& net, const std::vector<Example>& set, nj::Variant builder);

/// Adam with cosine decay and RF-based early stopping; on return `net` holds the
/// weights of the best validation epoch. Epochs are numbered from
/// start_epoch + 1 up to cfg.max_epochs; when start_epoch > 0 the incoming
/// weights count as epoch start_epoch and are kept unless an epoch beats them.
/// Deterministic given the seed.
/// A non-finite loss throws NumericError naming the epoch, batch and parameter norm.
TrainResult fit(net::Network& net, const std::vector<Example>& train_set, const std::vector<Example>& validation_set,
                const TrainConfig& cfg, std::size_t start_epoch = 0,
                const std::function<void(const EpochRecord&)>& on_epoch = {});

/// One forward/backward pass over a batch: returns the loss and fills grads.
double loss_and_gradients(const net::Network& net, const std::vector<const Example*>& batch, const LossSpec& loss,
                          std::vector<Tensor>* grads);

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history);
void write_history_file(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

}  // namespace phylo::train
