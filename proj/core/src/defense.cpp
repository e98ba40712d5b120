#include "venom/defense.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "venom/error.hpp"
#include "venom/rng.hpp"
#include "venom/train.hpp"

namespace venom {

namespace {
constexpr std::uint64_t kSubsetStream = 1;
constexpr std::uint64_t kFtStream = 2;
}  // namespace

void DefenseConfig::validate() const {
  if (!(clean_fraction > 0.0 && clean_fraction <= 1.0))
    throw Error("defense config: clean_fraction must be in (0,1]");
  if (ft_epochs < 0) throw Error("defense config: ft_epochs must be >= 0");
  if (prune_ratio < 0.0 || prune_ratio > 1.0)
    throw Error("defense config: prune_ratio must be in [0,1]");
}

std::vector<int> draw_clean_subset(const Dataset& clean_train, double fraction,
                                   std::uint64_t seed) {
  const int n = clean_train.size();
  int count = static_cast<int>(std::nearbyint(fraction * n));
  count = std::clamp(count, 1, n);
  std::vector<int> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  Rng rng(sub_seed(seed, kSubsetStream));
  partial_shuffle(pool, static_cast<std::size_t>(count), rng);
  std::vector<int> subset(pool.begin(), pool.begin() + count);
  std::sort(subset.begin(), subset.end());
  return subset;
}

Network fine_tune(const Network& model, const Dataset& clean_train,
                  const DefenseConfig& cfg) {
  cfg.validate();
  const std::vector<int> subset = draw_clean_subset(clean_train, cfg.clean_fraction, cfg.seed);
  if (subset.empty()) throw Error("fine_tune: empty clean subset");
  const Dataset tuning = clean_train.subset(subset);

  SupervisedOpts opts;
  opts.epochs = cfg.ft_epochs;
  opts.batch_size = cfg.batch_size;
  opts.base_lr = cfg.ft_lr;
  opts.momentum = cfg.momentum;
  opts.weight_decay = cfg.weight_decay;
  opts.seed = sub_seed(cfg.seed, kFtStream);
  return train_supervised(model, tuning, opts);
}

DormancyRanking rank_dormancy(const Network& model, const std::string& prune_layer,
                              const Dataset& clean_train, const std::vector<int>& subset) {
  const int li = model.layer_index(prune_layer);
  if (li < 0) throw Error("rank_dormancy: unknown layer '" + prune_layer + "'");
  if (model.layers[li].spec.kind != LayerKind::Conv2d)
    throw Error("rank_dormancy: layer '" + prune_layer + "' is not conv2d");
  if (subset.empty()) throw Error("rank_dormancy: empty subset");

  const int channels = model.layers[li].spec.out_channels;
  std::vector<int> all(channels);
  std::iota(all.begin(), all.end(), 0);
  ActivationTap tap{prune_layer, all};

  std::vector<double> mean(channels, 0.0);
  std::size_t total_positions = 0;
  constexpr int kBatch = 256;
  for (std::size_t start = 0; start < subset.size(); start += kBatch) {
    const std::vector<int> rows(subset.begin() + start,
                                subset.begin() + std::min(subset.size(), start + kBatch));
    auto acts = capture_activations(model, clean_train.gather(rows), tap);
    for (int c = 0; c < channels; ++c)
      for (const auto& v : acts[c])
        for (float x : v) mean[c] += x;
    total_positions += rows.size() * acts[0][0].size();
  }
  for (auto& m : mean) m /= static_cast<double>(total_positions);

  DormancyRanking r;
  r.order.resize(channels);
  std::iota(r.order.begin(), r.order.end(), 0);
  std::sort(r.order.begin(), r.order.end(), [&](int a, int b) {
    if (mean[a] != mean[b]) return mean[a] < mean[b];
    return a < b;
  });
  for (int c : r.order) r.mean_activation.push_back(mean[c]);
  return r;
}

Network prune_channels(const Network& model, const std::string& prune_layer,
                       const DormancyRanking& ranking, double ratio) {
  if (ratio < 0.0 || ratio > 1.0) throw Error("prune_channels: ratio must be in [0,1]");
  const int li = model.layer_index(prune_layer);
  if (li < 0) throw Error("prune_channels: unknown layer '" + prune_layer + "'");
  Network out = model;
  auto& layer = out.layers[li];
  const int channels = layer.spec.out_channels;
  const int kill = static_cast<int>(std::floor(ratio * channels));
  const std::size_t per_channel = layer.weight.numel() / channels;
  for (int i = 0; i < kill; ++i) {
    const int c = ranking.order.at(i);
    std::fill_n(layer.weight.data.begin() + static_cast<std::size_t>(c) * per_channel,
                per_channel, 0.0f);
    layer.bias.data[c] = 0.0f;
  }
  return out;
}

Network fine_pruning(const Network& model, const Dataset& clean_train,
                     const DefenseConfig& cfg) {
  cfg.validate();
  const std::vector<int> subset = draw_clean_subset(clean_train, cfg.clean_fraction, cfg.seed);
  const DormancyRanking ranking = rank_dormancy(model, cfg.prune_layer, clean_train, subset);
  const Network pruned = prune_channels(model, cfg.prune_layer, ranking, cfg.prune_ratio);
  return fine_tune(pruned, clean_train, cfg);
}

std::vector<SweepRow> pruning_sweep(const Network& model, const Dataset& clean_train,
                                    const std::vector<double>& ratios,
                                    const DefenseConfig& cfg, const DefenseEval& eval) {
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    if (ratios[i] < 0.0 || ratios[i] > 1.0)
      throw Error("pruning_sweep: ratio out of [0,1]");
    if (i && ratios[i] < ratios[i - 1]) throw Error("pruning_sweep: ratios must ascend");
  }
  std::vector<SweepRow> rows;
  for (double ratio : ratios) {
    DefenseConfig point = cfg;
    point.prune_ratio = ratio;
    const Network defended = fine_pruning(model, clean_train, point);
    auto [ba, asr] = eval(defended);
    rows.push_back({ratio, ba, asr});
  }
  return rows;
}

std::string render_sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "ratio,ba,asr\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.2f,%.6f,%.6f\n", r.ratio, r.ba, r.asr);
    os << buf;
  }
  return os.str();
}

}  // namespace venom
