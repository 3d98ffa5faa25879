#include <sstream>

#include "doctest.h"
#include "phylo/error.hpp"
#include "phylo/evaluate.hpp"
#include "support.hpp"

using namespace phylo;
using namespace phylo::eval;

namespace {

std::vector<Instance> instances(std::size_t count, std::size_t sites, double scale = 1.0) {
  std::vector<Instance> out;
  for (std::size_t i = 0; i < count; ++i) {
    PhyloTree t = testing::scaled_tree(testing::bd_tree(10, 100 + i), scale);
    Alignment a = sim::evolve_alignment(t, sim::SubstModel::jc(), sites, 200 + i);
    out.push_back({"inst" + std::to_string(i), std::move(t), std::move(a)});
  }
  return out;
}

}  // namespace

TEST_CASE("true distances reconstruct every tree") {
  const Evaluation ev = evaluate_pipeline({Method::truth()}, instances(6, 50));
  REQUIRE(ev.summary.size() == 1);
  CHECK(ev.summary[0].count == 6);
  CHECK(ev.summary[0].mean == 0.0);
  for (const auto& r : ev.instances) CHECK(r.rf == 0.0);
}

TEST_CASE("methods are evaluated on the same instances in order") {
  const auto inst = instances(5, 300);
  const std::vector<Method> methods{parse_method("hamming"), parse_method("jc"), parse_method("k2p")};
  const Evaluation ev = evaluate_pipeline(methods, inst);
  REQUIRE(ev.instances.size() == 15);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t m = 0; m < 3; ++m) {
      CHECK(ev.instances[i * 3 + m].instance == inst[i].name);
      CHECK(ev.instances[i * 3 + m].method == methods[m].name);
    }
  for (const auto& s : ev.summary) CHECK(s.count == 5);
  const Evaluation again = evaluate_pipeline(methods, inst);
  for (std::size_t k = 0; k < ev.instances.size(); ++k) CHECK(ev.instances[k].rf == again.instances[k].rf);
  CHECK_THROWS_AS(parse_method("logdet"), InvalidArgument);
}

TEST_CASE("quantiles interpolate linearly") {
  const std::vector<double> v{1, 2, 3, 4};
  CHECK(quantile_sorted(v, 0.0) == 1.0);
  CHECK(quantile_sorted(v, 1.0) == 4.0);
  CHECK(quantile_sorted(v, 0.5) == 2.5);
  CHECK(quantile_sorted(v, 0.25) == doctest::Approx(1.75));
  CHECK(quantile_sorted({7}, 0.3) == 7.0);
  CHECK_THROWS_AS(quantile_sorted({}, 0.5), InvalidArgument);
  const MethodSummary s = summarize("m", {4, 1, 3, 2});
  CHECK(s.mean == 2.5);
  CHECK(s.median == 2.5);
  CHECK(s.q75 == doctest::Approx(3.25));
}

TEST_CASE("csv reports") {
  std::ostringstream a, b;
  write_summary_csv(a, {summarize("jc", {0.5})});
  write_instances_csv(b, {{"x", "jc", 0.25}});
  CHECK(a.str() == "method,count,mean_rf,median_rf,q25_rf,q75_rf\njc,1,0.5,0.5,0.5,0.5\n");
  CHECK(b.str() == "instance,method,rf\nx,jc,0.25\n");
}

TEST_CASE("errors name the instance") {
  auto inst = instances(3, 200, 0.02);
  inst[1].alignment = Alignment(inst[1].alignment.labels(), [] {
    std::vector<std::string> rows(10, std::string(200, 'A'));
    rows[1] = std::string(200, 'C');
    return rows;
  }());
  try {
    evaluate_pipeline({parse_method("jc")}, inst, nj::Variant::NJ, dist::SaturationPolicy::error());
    FAIL("expected a saturation error");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("inst1") != std::string::npos);
  }
}
