#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "venom/dataset.hpp"
#include "venom/network.hpp"

namespace venom {

// Mean pairwise cosine similarity of per-channel activations.
struct SimilarityTable {
  std::vector<int> channels;
  std::vector<double> values;

  double value_for(int channel) const;
};

// The selected crucial channels of one conv layer, ordered by how many
// classes deem each crucial (descending), then by target-class similarity
// (descending), then by channel id (ascending).
struct Tcdp {
  std::string layer_name;
  std::vector<int> neurons;
  std::vector<int> counts;  // parallel to neurons
  double eps1 = 0.9;
  double eps2 = 0.7;
  int k = 10;
  bool truncated = false;  // fewer than k survivors were available

  bool empty() const { return neurons.empty(); }
  // "layer=<name>; neurons=<...>; counts=<...>; eps1=..; eps2=..; k=.."
  std::string to_text() const;
};

// Inverse of Tcdp::to_text (the export record embedded in reports).
Tcdp parse_tcdp_text(const std::string& text);

struct TcdpParams {
  std::string layer = "conv2";
  double eps1 = 0.9;
  double eps2 = 0.7;
  int k = 10;
  // Bounds the pair loop: each random group keeps at most max_group
  // samples. 0 disables the cap.
  int max_group = 50;
};

// Splits `samples` into two seeded random groups (sizes differing by at
// most one, each then capped), and returns per channel the mean cosine
// similarity over all cross pairs of post-ReLU activation vectors.
// Cosine against a zero vector is 0.
SimilarityTable calc_similarity(const Network& clean_net, const std::string& layer,
                                const std::vector<int>& channels, const Dataset& data,
                                const std::vector<int>& samples, std::uint64_t seed,
                                int max_group);

// Per-class crucial channels (similarity over the class > eps1), minus the
// common channels (similarity over the whole dataset >= eps2), ranked by
// the number of classes that consider them crucial; top k returned.
// CalcSimilarity call for class i uses sub_seed(seed, i); the whole-dataset
// call uses sub_seed(seed, num_classes).
Tcdp generate_tcdp(const Network& clean_net, const Dataset& clean, int target,
                   const TcdpParams& params, std::uint64_t seed);

}  // namespace venom
