#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "venom/error.hpp"

namespace venom {

// Dense row-major n-d array. `grad` stays empty until a backward pass
// allocates it; when present it always mirrors `data` in length.
template <typename S>
struct TensorT {
  std::vector<int> shape;
  std::vector<S> data;
  std::vector<S> grad;

  TensorT() = default;
  explicit TensorT(std::vector<int> shp)
      : shape(std::move(shp)), data(numel_of(shape), S(0)) {}

  static std::size_t numel_of(const std::vector<int>& shp) {
    std::size_t n = 1;
    for (int d : shp) {
      if (d <= 0) throw ShapeError("tensor dimension must be positive");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  std::size_t numel() const { return data.size(); }

  int dim(std::size_t i) const { return shape.at(i); }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), S(0));
  }

  void clear_grad() { grad.clear(); }

  bool has_grad() const { return grad.size() == data.size() && !data.empty(); }

  bool all_finite() const {
    for (S v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }
};

using Tensor = TensorT<float>;

template <typename S>
bool same_shape(const TensorT<S>& a, const TensorT<S>& b) {
  return a.shape == b.shape;
}

inline std::string shape_string(const std::vector<int>& shp) {
  std::string s = "(";
  for (std::size_t i = 0; i < shp.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shp[i]);
  }
  return s + ")";
}

}  // namespace venom
