#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "venom/dataset.hpp"
#include "venom/network.hpp"

namespace venom {

// A defender holds a small clean subset of the training data and may
// fine-tune and/or prune the suspect model. Defenses never see poisoned
// data or the trigger.
struct DefenseConfig {
  double clean_fraction = 0.05;  // share of clean training data available
  int ft_epochs = 10;
  double ft_lr = 0.01;
  std::string prune_layer = "conv2";
  double prune_ratio = 0.0;
  std::uint64_t seed = 0;
  int batch_size = 128;
  double momentum = 0.9;
  double weight_decay = 5e-4;

  void validate() const;
};

// Channels of the prune layer ordered by mean post-ReLU activation over
// the defender's clean subset, most dormant first. Ties break toward the
// lower channel id.
struct DormancyRanking {
  std::vector<int> order;
  std::vector<double> mean_activation;  // parallel to order
};

// Seeded draw without replacement of round(fraction*N) (at least 1)
// training indices, the defender's clean subset.
std::vector<int> draw_clean_subset(const Dataset& clean_train, double fraction,
                                   std::uint64_t seed);

// Supervised fine-tuning on the defender's subset with cosine LR from
// ft_lr; returns the defended copy, the input model is untouched.
Network fine_tune(const Network& model, const Dataset& clean_train,
                  const DefenseConfig& cfg);

DormancyRanking rank_dormancy(const Network& model, const std::string& prune_layer,
                              const Dataset& clean_train, const std::vector<int>& subset);

// Disables the first floor(ratio * num_channels) channels of the ranking
// by zeroing their conv kernels and biases; shapes are unchanged.
Network prune_channels(const Network& model, const std::string& prune_layer,
                       const DormancyRanking& ranking, double ratio);

// Prune dormant channels, then fine-tune.
Network fine_pruning(const Network& model, const Dataset& clean_train,
                     const DefenseConfig& cfg);

struct SweepRow {
  double ratio;
  double ba;
  double asr;
};

// (ba, asr) of a candidate model, supplied by the caller; the defense
// itself never touches the evaluation data.
using DefenseEval = std::function<std::pair<double, double>(const Network&)>;

// fine_pruning from a fresh copy at every ratio; ratios must be ascending
// and within [0,1].
std::vector<SweepRow> pruning_sweep(const Network& model, const Dataset& clean_train,
                                    const std::vector<double>& ratios,
                                    const DefenseConfig& cfg, const DefenseEval& eval);

// "ratio,ba,asr" rows
std::string render_sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace venom
