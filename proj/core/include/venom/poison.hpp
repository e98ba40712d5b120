#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "venom/dataset.hpp"

namespace venom {

// Trigger applied to an image: either a fixed patch stamped at a corner
// position, or full-image alpha blending with a pattern.
struct TriggerSpec {
  enum class Kind { Patch, Blend };
  Kind kind = Kind::Patch;
  Tensor pattern;  // patch: (C,h,w); blend: (C,H,W); values in [0,1]
  int row = 0;     // patch top-left
  int col = 0;
  float alpha = 0.2f;  // blend weight, strictly in (0,1)

  void validate(int channels, int height, int width) const;
};

// The chosen poisoning: target label, rate, and the realized index set.
struct PoisonPlan {
  int target = 0;
  double poison_rate = 0.1;
  std::vector<int> indices;  // sorted, unique, labels originally != target
  TriggerSpec trigger;
  std::uint64_t seed = 0;
};

// Poisoned dataset plus the partition views over it.
struct BackdooredDataset {
  Dataset data;
  PoisonPlan plan;
  std::vector<int> poisoned_indices;  // == plan.indices
  std::vector<int> benign_indices;    // complement
  std::vector<int> target_indices;    // every sample labeled target (incl. poisoned)
};

// Returns the triggered image; the input is untouched.
// patch: pixels inside the patch rectangle replaced by the pattern, all
// others bit-identical. blend: (1-alpha)*image + alpha*pattern, clamped.
Tensor apply_trigger(const Tensor& image, const TriggerSpec& trigger);

// Poison round(rate*N) samples drawn uniformly without replacement (seeded)
// from the samples whose label differs from `target`; each drawn sample is
// triggered and relabeled to `target`.
BackdooredDataset build_backdoored_dataset(const Dataset& clean, const TriggerSpec& trigger,
                                           int target, double poison_rate,
                                           std::uint64_t seed);

// Every test sample whose true label != target, triggered and relabeled to
// target; samples already labeled target are excluded.
Dataset build_asr_eval_set(const Dataset& clean_test, const TriggerSpec& trigger, int target);

}  // namespace venom
