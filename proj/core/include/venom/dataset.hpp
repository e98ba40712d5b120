#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "venom/tensor.hpp"

namespace venom {

// Image classification dataset: (N,C,H,W) pixels in [0,1] plus labels.
struct Dataset {
  Tensor images;
  std::vector<int> labels;
  int num_classes = 0;

  int size() const { return images.shape.empty() ? 0 : images.dim(0); }
  int channels() const { return images.dim(1); }
  int height() const { return images.dim(2); }
  int width() const { return images.dim(3); }

  // Copy of sample i as a (C,H,W) tensor.
  Tensor sample(int i) const;

  // Batch tensor (n,C,H,W) for the given sample indices, plus their labels.
  Tensor gather(const std::vector<int>& indices, std::vector<int>* out_labels = nullptr) const;

  // Indices of all samples with the given label.
  std::vector<int> indices_of_class(int label) const;

  // New dataset holding copies of the selected samples.
  Dataset subset(const std::vector<int>& indices) const;

  void validate() const;
};

// Deterministic synthetic shape-classification data. Each class is a
// parametric geometric figure (disk, ring, cross, ...) with jittered
// position, size and intensity over a noisy background. Labels are laid
// out round-robin: label(i) = i % num_classes.
Dataset generate_synthetic_dataset(int num_classes, int per_class, int image_size,
                                   std::uint64_t seed, int channels = 1);

// Binary dataset file:
// "VNDS" | version u32 LE | N u32 | C,H,W u16 | num_classes u16 |
// labels N x u16 LE | pixels N*C*H*W x f32 LE.
inline constexpr std::uint32_t kDatasetVersion = 1;

void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace venom
