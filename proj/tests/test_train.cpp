#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "phylo/distance.hpp"
#include "phylo/error.hpp"
#include "phylo/optim.hpp"
#include "phylo/scalar_head.hpp"
#include "phylo/train.hpp"
#include "support.hpp"

using namespace phylo;
using namespace phylo::train;

namespace {

net::Network small_net(std::uint64_t seed = 2) {
  net::NetworkSpec s;
  s.architecture = net::Architecture::SitesAttentionP;
  s.channels = 8;
  s.heads = 2;
  s.scalar_hidden = 8;
  s.taxa = 8;
  return net::Network(s, seed);
}

DataConfig small_data() {
  DataConfig d;
  d.tree.n = 8;
  d.sites = 40;
  d.seed = 5;
  return d;
}

TrainConfig small_train(std::size_t epochs) {
  TrainConfig c;
  c.max_epochs = epochs;
  c.patience = epochs;
  c.batch_size = 4;
  c.adam.learning_rate = 0.005;
  return c;
}

double sup_error(const ScalarHead& h, const std::function<double(double)>& f, double lo, double hi) {
  double worst = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double x = lo + (hi - lo) * i / 1000.0;
    worst = std::max(worst, std::abs(h(x) - f(x)));
  }
  return worst;
}

}  // namespace

TEST_CASE("cosine schedule") {
  CHECK(cosine_lr(0.1, 0, 100) == 0.1);
  CHECK(cosine_lr(0.1, 50, 100) == doctest::Approx(0.05));
  CHECK(cosine_lr(0.1, 100, 100) == 0.0);
  CHECK(cosine_lr(0.1, 150, 100) == 0.0);
  double prev = 1.0;
  for (std::size_t s = 0; s <= 100; ++s) {
    CHECK(cosine_lr(0.1, s, 100) <= prev);
    prev = cosine_lr(0.1, s, 100);
  }
}

TEST_CASE("adam fits a line") {
  net::ParamSet ps;
  const std::size_t w = ps.add("w", Tensor(Shape{1}, 0.0));
  AdamConfig cfg;
  cfg.learning_rate = 0.05;
  Adam adam(ps, cfg);
  const std::vector<double> xs{-1, -0.5, 0.5, 1, 2};
  for (int step = 0; step < 3000; ++step) {
    double g = 0.0;
    for (double x : xs) g += 2 * (ps.value(w)[0] * x - 2 * x) * x / xs.size();
    adam.step(ps, {Tensor(Shape{1}, g)}, cosine_lr(cfg.learning_rate, step, 3000));
  }
  CHECK(std::abs(ps.value(w)[0] - 2.0) < 1e-3);
  CHECK(adam.steps() == 3000);
  AdamConfig bad;
  bad.beta1 = 1.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("examples are sorted and reproducible per index") {
  const auto a = simulate_examples(small_data(), "train", 3);
  const auto b = simulate_examples(small_data(), "train", 5);
  const auto c = simulate_examples(small_data(), "val", 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a[i].alignment == b[i].alignment);
    CHECK(!(a[i].alignment == c[i].alignment));
    const auto& l = a[i].alignment.labels();
    CHECK(std::is_sorted(l.begin(), l.end()));
    CHECK(a[i].one_hot.shape() == Shape{8, 40, 4});
    CHECK(a[i].distances[1] == testing::lookup(patristic_matrix(a[i].tree), l[0], l[1]));
  }
}

TEST_CASE("training is deterministic and reduces the loss") {
  const auto train_set = simulate_examples(small_data(), "train", 8);
  const auto val_set = simulate_examples(small_data(), "val", 4);
  net::Network a = small_net(), b = small_net();
  const auto ra = fit(a, train_set, val_set, small_train(5));
  const auto rb = fit(b, train_set, val_set, small_train(5));
  REQUIRE(ra.history.size() == 5);
  for (std::size_t i = 0; i < a.params().size(); ++i) CHECK(a.params().value(i) == b.params().value(i));
  for (std::size_t e = 0; e < 5; ++e) CHECK(ra.history[e].train_loss == rb.history[e].train_loss);
  MESSAGE("loss " << ra.history.front().train_loss << " -> " << ra.history.back().train_loss);
  CHECK(ra.history.back().train_loss < ra.history.front().train_loss);

  std::ostringstream csv;
  write_history_csv(csv, ra.history);
  CHECK(csv.str().rfind("epoch,train_loss,val_rf,lr\n1,", 0) == 0);
}

TEST_CASE("the best validation epoch is restored") {
  const auto train_set = simulate_examples(small_data(), "train", 8);
  const auto val_set = simulate_examples(small_data(), "val", 4);
  net::Network n = small_net(3);
  std::vector<net::ParamSet> snapshots;
  TrainConfig cfg = small_train(8);
  cfg.patience = 2;
  const auto r = fit(n, train_set, val_set, cfg, 0, [&](const EpochRecord&) { snapshots.push_back(n.params()); });
  REQUIRE(r.best_epoch >= 1);
  const net::ParamSet& best = snapshots[r.best_epoch - 1];
  for (std::size_t i = 0; i < best.size(); ++i) CHECK(n.params().value(i) == best.value(i));
  double min_rf = 1.0;
  for (const auto& h : r.history) min_rf = std::min(min_rf, h.validation_rf);
  CHECK(r.best_validation_rf == min_rf);
  if (r.stopped_early) CHECK(r.history.size() < 8);
}

TEST_CASE("resumed training continues epoch numbering") {
  const auto train_set = simulate_examples(small_data(), "train", 4);
  net::Network n = small_net();
  const auto r = fit(n, train_set, train_set, small_train(5), 3);
  REQUIRE(r.history.size() == 2);
  CHECK(r.history[0].epoch == 4);
  CHECK(r.history[1].epoch == 5);
}

TEST_CASE("a resumed run never returns weights worse than its starting point") {
  const auto train_set = simulate_examples(small_data(), "train", 8);
  const auto val_set = simulate_examples(small_data(), "val", 4);
  net::Network n = small_net(4);
  fit(n, train_set, val_set, small_train(3));
  const net::ParamSet start = n.params();
  const double start_rf = validation_rf(n, val_set, nj::Variant::NJ);
  TrainConfig wild = small_train(6);
  wild.adam.learning_rate = 5.0;
  const auto r = fit(n, train_set, val_set, wild, 3);
  CHECK(r.history.front().epoch == 4);
  CHECK(r.best_validation_rf <= start_rf);
  CHECK(validation_rf(n, val_set, nj::Variant::NJ) == r.best_validation_rf);
  if (r.best_epoch == 3) {
    for (std::size_t i = 0; i < start.size(); ++i) CHECK(n.params().value(i) == start.value(i));
  }
}

TEST_CASE("a non-finite loss aborts with context") {
  const auto train_set = simulate_examples(small_data(), "train", 4);
  net::Network n = small_net();
  n.params().value(0)[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    fit(n, train_set, train_set, small_train(2));
    FAIL("expected a numeric error");
  } catch (const NumericError& e) {
    const std::string what = e.what();
    CHECK(what.find("epoch 1") != std::string::npos);
    CHECK(what.find("batch 1") != std::string::npos);
  }
}

TEST_CASE("scalar head fits smooth maps") {
  std::vector<double> xs, id, jc;
  for (int i = 0; i <= 200; ++i) {
    xs.push_back(i / 200.0 * 0.74);
    id.push_back(xs.back());
    jc.push_back(dist::jc_correction(xs.back()));
  }
  ScalarHeadConfig cfg;
  const ScalarHead h = fit_scalar_head(xs, id, cfg);
  CHECK(h.parameter_count() == 661);
  CHECK(h.layer_count() == 6);
  const double id_err = sup_error(h, [](double x) { return x; }, 0.0, 0.74);
  const ScalarHead j = fit_scalar_head(xs, jc, cfg);
  const double jc_err = sup_error(j, [](double x) { return dist::jc_correction(x); }, 0.0, 0.7);
  MESSAGE("identity sup " << id_err << ", jc sup " << jc_err);
  CHECK(id_err < 1e-2);
  CHECK(jc_err < 1e-2);
  CHECK_THROWS_AS(fit_scalar_head({0.5, 0.5}, {1, 1}, cfg), InvalidArgument);
}
