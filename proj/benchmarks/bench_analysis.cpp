#include <benchmark/benchmark.h>

#include <numeric>

#include "venom/metrics.hpp"
#include "venom/rng.hpp"
#include "venom/tcdp.hpp"
#include "venom/train.hpp"

using namespace venom;

namespace {

void CalcSimilarity(benchmark::State& state) {
  const int per_class = static_cast<int>(state.range(0));
  Dataset ds = generate_synthetic_dataset(4, per_class, 16, 2);
  Network net = build_small_cnn<float>(1, 16, 16, 4, 1, 7);
  std::vector<int> channels(16);
  std::iota(channels.begin(), channels.end(), 0);
  const std::vector<int> members = ds.indices_of_class(0);
  for (auto _ : state) {
    SimilarityTable t = calc_similarity(net, "conv2", channels, ds, members, 5, 50);
    benchmark::DoNotOptimize(t.values.data());
  }
}
BENCHMARK(CalcSimilarity)->Arg(50)->Arg(150);

void AsurScore(benchmark::State& state) {
  Rng rng(3);
  for (auto _ : state) {
    const double v = asur(0.85 + 0.1 * rng.uniform(), 0.9, 0.6 + 0.3 * rng.uniform(),
                          rng.uniform());
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(AsurScore);

void LinearCka(benchmark::State& state) {
  const int samples = static_cast<int>(state.range(0));
  Rng rng(19);
  std::vector<std::vector<double>> x(samples, std::vector<double>(256));
  std::vector<std::vector<double>> y(samples, std::vector<double>(64));
  for (auto& row : x)
    for (auto& v : row) v = rng.uniform(-1.0, 1.0);
  for (auto& row : y)
    for (auto& v : row) v = rng.uniform(-1.0, 1.0);
  for (auto _ : state) {
    const double v = linear_cka(x, y);
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(LinearCka)->Arg(50)->Arg(100);

}  // namespace
