#include <benchmark/benchmark.h>

#include "venom/dataset.hpp"
#include "venom/loss.hpp"
#include "venom/network.hpp"
#include "venom/optim.hpp"
#include "venom/rng.hpp"

using namespace venom;

namespace {

Tensor random_batch(int n, int c, int h, int w, std::uint64_t seed) {
  Tensor x({n, c, h, w});
  Rng rng(seed);
  for (auto& v : x.data) v = static_cast<float>(rng.uniform());
  return x;
}

void ForwardSmallCnn(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  Network net = build_small_cnn<float>(1, 16, 16, 4, 1, 3);
  const Tensor x = random_batch(batch, 1, 16, 16, 9);
  for (auto _ : state) {
    ForwardTrace<float> tr = forward(net, x);
    benchmark::DoNotOptimize(tr.logits().data.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(ForwardSmallCnn)->Arg(16)->Arg(64)->Arg(128);

void TrainStepSmallCnn(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  Network net = build_small_cnn<float>(1, 16, 16, 4, 1, 3);
  const Tensor x = random_batch(batch, 1, 16, 16, 9);
  std::vector<int> labels(batch);
  for (int i = 0; i < batch; ++i) labels[i] = i % 4;
  SgdState sgd;
  sgd.init_for(net);
  JointLossSpec<float> spec;
  for (auto _ : state) {
    LossValue<float> lv = forward_backward(net, x, labels, spec);
    sgd_update(sgd, net, 0.001f);
    benchmark::DoNotOptimize(lv.total);
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(TrainStepSmallCnn)->Arg(16)->Arg(64)->Arg(128);

void SyntheticDataset(benchmark::State& state) {
  for (auto _ : state) {
    Dataset ds = generate_synthetic_dataset(4, 50, 16, 11);
    benchmark::DoNotOptimize(ds.images.data.data());
  }
}
BENCHMARK(SyntheticDataset);

}  // namespace
