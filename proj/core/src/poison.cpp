#include "venom/poison.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "venom/error.hpp"
#include "venom/rng.hpp"

namespace venom {

void TriggerSpec::validate(int channels, int height, int width) const {
  if (pattern.shape.size() != 3)
    throw ShapeError("trigger: pattern must be (C,h,w)");
  if (pattern.dim(0) != channels)
    throw ShapeError("trigger: pattern has " + std::to_string(pattern.dim(0)) +
                     " channels, image has " + std::to_string(channels));
  for (float v : pattern.data)
    if (v < 0.0f || v > 1.0f) throw Error("trigger: pattern values must be in [0,1]");
  if (kind == Kind::Patch) {
    if (row < 0 || col < 0 || row + pattern.dim(1) > height ||
        col + pattern.dim(2) > width)
      throw Error("trigger: patch out of bounds at (" + std::to_string(row) + "," +
                  std::to_string(col) + ")");
  } else {
    if (pattern.dim(1) != height || pattern.dim(2) != width)
      throw ShapeError("trigger: blend pattern must match image size");
    if (!(alpha > 0.0f && alpha < 1.0f))
      throw Error("trigger: blend alpha must be strictly in (0,1)");
  }
}

Tensor apply_trigger(const Tensor& image, const TriggerSpec& trigger) {
  if (image.shape.size() != 3) throw ShapeError("apply_trigger: image must be (C,H,W)");
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  trigger.validate(c, h, w);

  Tensor out = image;
  if (trigger.kind == TriggerSpec::Kind::Patch) {
    const int ph = trigger.pattern.dim(1), pw = trigger.pattern.dim(2);
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < ph; ++y)
        for (int x = 0; x < pw; ++x)
          out.data[(static_cast<std::size_t>(ch) * h + trigger.row + y) * w +
                   trigger.col + x] =
              trigger.pattern.data[(static_cast<std::size_t>(ch) * ph + y) * pw + x];
  } else {
    const float a = trigger.alpha;
    for (std::size_t i = 0; i < out.numel(); ++i)
      out.data[i] = std::clamp((1.0f - a) * image.data[i] + a * trigger.pattern.data[i],
                               0.0f, 1.0f);
  }
  return out;
}

BackdooredDataset build_backdoored_dataset(const Dataset& clean, const TriggerSpec& trigger,
                                           int target, double poison_rate,
                                           std::uint64_t seed) {
  clean.validate();
  if (!(poison_rate > 0.0 && poison_rate < 1.0))
    throw Error("poison: rate must be strictly in (0,1)");
  if (target < 0 || target >= clean.num_classes)
    throw Error("poison: target label out of range");
  trigger.validate(clean.channels(), clean.height(), clean.width());

  const int n = clean.size();
  // round-to-nearest, ties to even
  const int count = static_cast<int>(std::nearbyint(poison_rate * n));

  std::vector<int> eligible;
  for (int i = 0; i < n; ++i)
    if (clean.labels[i] != target) eligible.push_back(i);
  if (static_cast<std::size_t>(count) > eligible.size())
    throw Error("poison: only " + std::to_string(eligible.size()) +
                " eligible samples for " + std::to_string(count) + " poisons");

  Rng rng(seed);
  partial_shuffle(eligible, static_cast<std::size_t>(count), rng);
  std::vector<int> chosen(eligible.begin(), eligible.begin() + count);
  std::sort(chosen.begin(), chosen.end());

  BackdooredDataset bd;
  bd.data = clean;
  bd.plan.target = target;
  bd.plan.poison_rate = poison_rate;
  bd.plan.indices = chosen;
  bd.plan.trigger = trigger;
  bd.plan.seed = seed;
  bd.poisoned_indices = chosen;

  const std::size_t plane =
      static_cast<std::size_t>(clean.channels()) * clean.height() * clean.width();
  for (int i : chosen) {
    Tensor poisoned = apply_trigger(clean.sample(i), trigger);
    std::copy(poisoned.data.begin(), poisoned.data.end(),
              bd.data.images.data.begin() + static_cast<std::size_t>(i) * plane);
    bd.data.labels[i] = target;
  }

  std::size_t next_poisoned = 0;
  for (int i = 0; i < n; ++i) {
    if (next_poisoned < chosen.size() && chosen[next_poisoned] == i)
      ++next_poisoned;
    else
      bd.benign_indices.push_back(i);
    if (bd.data.labels[i] == target) bd.target_indices.push_back(i);
  }
  return bd;
}

Dataset build_asr_eval_set(const Dataset& clean_test, const TriggerSpec& trigger, int target) {
  clean_test.validate();
  if (clean_test.size() == 0) throw Error("asr set: empty test set");
  std::vector<int> keep;
  for (int i = 0; i < clean_test.size(); ++i)
    if (clean_test.labels[i] != target) keep.push_back(i);
  if (keep.empty()) throw Error("asr set: all test samples carry the target label");

  Dataset out;
  out.num_classes = clean_test.num_classes;
  out.images = Tensor({static_cast<int>(keep.size()), clean_test.channels(),
                       clean_test.height(), clean_test.width()});
  out.labels.assign(keep.size(), target);
  const std::size_t plane = static_cast<std::size_t>(clean_test.channels()) *
                            clean_test.height() * clean_test.width();
  for (std::size_t r = 0; r < keep.size(); ++r) {
    Tensor t = apply_trigger(clean_test.sample(keep[r]), trigger);
    std::copy(t.data.begin(), t.data.end(), out.images.data.begin() + r * plane);
  }
  return out;
}

}  // namespace venom
