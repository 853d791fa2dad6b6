#include "dcu/kernels.hpp"
#include "dcu/loss.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

Eigen::MatrixXd random_rows(int n, int d, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) m(i, j) = normal(rng);
    m.row(i).normalize();
  }
  return m;
}

void BM_UniformityLoss(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto c = dcu::Centroids::free(random_rows(n, 16, 1));
  for (auto _ : state) benchmark::DoNotOptimize(dcu::decoupled_uniformity_loss(c, 2.0).value);
  state.SetComplexityN(n);
}
BENCHMARK(BM_UniformityLoss)->RangeMultiplier(2)->Range(32, 1024)->Complexity();

void BM_PairwiseDirect(benchmark::State& state) {
  const auto rows = random_rows(static_cast<int>(state.range(0)), 16, 2);
  for (auto _ : state)
    benchmark::DoNotOptimize(dcu::pairwise_sq_distances(rows, dcu::DistanceMethod::Direct));
}
BENCHMARK(BM_PairwiseDirect)->Arg(64)->Arg(256)->Arg(1024);

void BM_PairwiseGram(benchmark::State& state) {
  const auto rows = random_rows(static_cast<int>(state.range(0)), 16, 2);
  for (auto _ : state)
    benchmark::DoNotOptimize(dcu::pairwise_sq_distances(rows, dcu::DistanceMethod::Gram));
}
BENCHMARK(BM_PairwiseGram)->Arg(64)->Arg(256)->Arg(1024);

void BM_CentroidWeights(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto k = dcu::build_kernel_matrix(random_rows(n, 8, 3), {dcu::KernelKind::Rbf, 1.0});
  for (auto _ : state)
    benchmark::DoNotOptimize(dcu::centroid_weights(k, dcu::default_lambda(n)).weights.data());
}
BENCHMARK(BM_CentroidWeights)->Arg(64)->Arg(256)->Arg(512);

void BM_KernelMatrix(benchmark::State& state) {
  const auto priors = random_rows(static_cast<int>(state.range(0)), 8, 4);
  const int threads = static_cast<int>(state.range(1));
  for (auto _ : state)
    benchmark::DoNotOptimize(
        dcu::build_kernel_matrix(priors, {dcu::KernelKind::Rbf, 1.0}, threads).entries().data());
}
BENCHMARK(BM_KernelMatrix)->Args({1024, 1})->Args({1024, 4});

}  // namespace

BENCHMARK_MAIN();
