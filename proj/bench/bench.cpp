#include <benchmark/benchmark.h>
#include <omp.h>

#include <vector>

#include "phylo/distance.hpp"
#include "phylo/kernels.hpp"
#include "phylo/matrix.hpp"
#include "phylo/nj.hpp"
#include "phylo/simulate.hpp"

using namespace phylo;

namespace {

PhyloTree bd_tree(int n, std::uint64_t seed) {
  sim::BDParams p;
  p.n = n;
  return sim::simulate_bd_tree(p, seed);
}

std::vector<double> filled(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(count);
  for (double& x : v) x = rng.normal();
  return v;
}

void matmul_parallel(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const auto a = filled(n * n, 1), b = filled(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : st) {
    kernels::matmul(a.data(), b.data(), c.data(), n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
}

void matmul_serial(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const auto a = filled(n * n, 1), b = filled(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : st) {
    kernels::serial::matmul(a.data(), b.data(), c.data(), n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
}

void distances_parallel(benchmark::State& st) {
  const Alignment a = sim::evolve_alignment(bd_tree(static_cast<int>(st.range(0)), 3), sim::SubstModel::jc(), 1000, 4);
  for (auto _ : st) benchmark::DoNotOptimize(dist::distance_matrix(a, dist::DistanceKind::K2P));
}

void distances_serial(benchmark::State& st) {
  const Alignment a = sim::evolve_alignment(bd_tree(static_cast<int>(st.range(0)), 3), sim::SubstModel::jc(), 1000, 4);
  for (auto _ : st) benchmark::DoNotOptimize(dist::serial::distance_matrix(a, dist::DistanceKind::K2P));
}

void patristic_parallel(benchmark::State& st) {
  const PhyloTree t = bd_tree(static_cast<int>(st.range(0)), 5);
  for (auto _ : st) benchmark::DoNotOptimize(patristic_matrix(t));
}

void patristic_serial(benchmark::State& st) {
  const PhyloTree t = bd_tree(static_cast<int>(st.range(0)), 5);
  for (auto _ : st) benchmark::DoNotOptimize(serial::patristic_matrix(t));
}

void evolve_parallel(benchmark::State& st) {
  const PhyloTree t = bd_tree(20, 6);
  const auto L = static_cast<std::size_t>(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(sim::evolve_alignment(t, sim::SubstModel::k2p(2.0), L, 7));
}

void evolve_serial(benchmark::State& st) {
  const PhyloTree t = bd_tree(20, 6);
  const auto L = static_cast<std::size_t>(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(sim::serial::evolve_alignment(t, sim::SubstModel::k2p(2.0), L, 7));
}

void neighbor_joining(benchmark::State& st) {
  const DistanceMatrix d = patristic_matrix(bd_tree(static_cast<int>(st.range(0)), 8));
  for (auto _ : st) benchmark::DoNotOptimize(nj::neighbor_join(d));
  st.SetComplexityN(st.range(0));
}

void bionj(benchmark::State& st) {
  const DistanceMatrix d = patristic_matrix(bd_tree(static_cast<int>(st.range(0)), 8));
  for (auto _ : st) benchmark::DoNotOptimize(nj::bionj(d));
  st.SetComplexityN(st.range(0));
}

}  // namespace

BENCHMARK(matmul_serial)->Arg(64)->Arg(256);
BENCHMARK(matmul_parallel)->Arg(64)->Arg(256);
BENCHMARK(distances_serial)->Arg(20)->Arg(100);
BENCHMARK(distances_parallel)->Arg(20)->Arg(100);
BENCHMARK(patristic_serial)->Arg(100)->Arg(1000);
BENCHMARK(patristic_parallel)->Arg(100)->Arg(1000);
BENCHMARK(evolve_serial)->Arg(1000)->Arg(100000);
BENCHMARK(evolve_parallel)->Arg(1000)->Arg(100000);
BENCHMARK(neighbor_joining)->RangeMultiplier(2)->Range(16, 512)->Complexity();
BENCHMARK(bionj)->RangeMultiplier(2)->Range(16, 512)->Complexity();

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::AddCustomContext("omp_max_threads", std::to_string(omp_get_max_threads()));
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
