#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "venom/layers.hpp"
#include "venom/rng.hpp"
#include "venom/tensor.hpp"

namespace venom {

template <typename S>
struct NetworkT {
  int in_channels = 0;
  int in_height = 0;
  int in_width = 0;
  int num_classes = 0;
  std::vector<LayerT<S>> layers;

  int layer_index(const std::string& name) const {
    for (std::size_t i = 0; i < layers.size(); ++i)
      if (layers[i].spec.name == name) return static_cast<int>(i);
    return -1;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers)
      if (l.has_params()) n += l.weight.numel() + l.bias.numel();
    return n;
  }

  void clear_grads() {
    for (auto& l : layers) {
      l.weight.clear_grad();
      l.bias.clear_grad();
    }
  }

  bool parameters_equal(const NetworkT& other) const {
    if (layers.size() != other.layers.size()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].weight.data != other.layers[i].weight.data) return false;
      if (layers[i].bias.data != other.layers[i].bias.data) return false;
    }
    return true;
  }
};

using Network = NetworkT<float>;

// Reference architecture:
//   conv(3x3, ->8k)/relu/pool -> conv(3x3, ->16k)/relu/pool
//   -> flatten -> dense(->64k)/relu -> dense(->num_classes)
// The last conv layer is named "conv2". He-normal init seeded by init_seed.
template <typename S>
NetworkT<S> build_small_cnn(int channels, int height, int width, int num_classes,
                            int width_multiplier = 1, std::uint64_t init_seed = 0) {
  if (num_classes < 2) throw Error("build_small_cnn: num_classes must be >= 2");
  if (width_multiplier < 1) throw Error("build_small_cnn: width_multiplier must be >= 1");
  if (channels < 1) throw Error("build_small_cnn: channels must be >= 1");
  if (height < 8 || width < 8)
    throw ShapeError("build_small_cnn: spatial dims too small for two pools");
  if (height % 4 || width % 4)
    throw ShapeError("build_small_cnn: spatial dims must be divisible by 4");

  const int k = width_multiplier;
  NetworkT<S> net;
  net.in_channels = channels;
  net.in_height = height;
  net.in_width = width;
  net.num_classes = num_classes;

  Rng rng(init_seed);
  auto add_conv = [&](const std::string& name, int cin, int cout) {
    LayerT<S> l;
    l.spec.kind = LayerKind::Conv2d;
    l.spec.name = name;
    l.spec.in_channels = cin;
    l.spec.out_channels = cout;
    l.spec.kernel_size = 3;
    l.weight = TensorT<S>({cout, cin, 3, 3});
    l.bias = TensorT<S>({cout});
    const double std_dev = std::sqrt(2.0 / (cin * 9));
    for (auto& v : l.weight.data) v = static_cast<S>(rng.normal() * std_dev);
    net.layers.push_back(std::move(l));
  };
  auto add_dense = [&](const std::string& name, int fin, int fout) {
    LayerT<S> l;
    l.spec.kind = LayerKind::Dense;
    l.spec.name = name;
    l.spec.in_features = fin;
    l.spec.out_features = fout;
    l.weight = TensorT<S>({fout, fin});
    l.bias = TensorT<S>({fout});
    const double std_dev = std::sqrt(2.0 / fin);
    for (auto& v : l.weight.data) v = static_cast<S>(rng.normal() * std_dev);
    net.layers.push_back(std::move(l));
  };
  auto add_plain = [&](LayerKind kind, const std::string& name) {
    LayerT<S> l;
    l.spec.kind = kind;
    l.spec.name = name;
    net.layers.push_back(std::move(l));
  };

  add_conv("conv1", channels, 8 * k);
  add_plain(LayerKind::Relu, "relu1");
  add_plain(LayerKind::MaxPool2x2, "pool1");
  add_conv("conv2", 8 * k, 16 * k);
  add_plain(LayerKind::Relu, "relu2");
  add_plain(LayerKind::MaxPool2x2, "pool2");
  add_plain(LayerKind::Flatten, "flatten");
  add_dense("dense1", 16 * k * (height / 4) * (width / 4), 64 * k);
  add_plain(LayerKind::Relu, "relu3");
  add_dense("dense2", 64 * k, num_classes);
  return net;
}

// Per-layer outputs of one forward pass; acts[0] is the input batch and
// acts[i+1] the output of layer i.
template <typename S>
struct ForwardTrace {
  std::vector<TensorT<S>> acts;
  const TensorT<S>& logits() const { return acts.back(); }
};

template <typename S>
ForwardTrace<S> forward(const NetworkT<S>& net, const TensorT<S>& input) {
  if (input.shape.size() != 4 || input.dim(1) != net.in_channels ||
      input.dim(2) != net.in_height || input.dim(3) != net.in_width)
    throw ShapeError("forward: input shape " + shape_string(input.shape) +
                     " does not match network input (N," +
                     std::to_string(net.in_channels) + "," +
                     std::to_string(net.in_height) + "," +
                     std::to_string(net.in_width) + ")");
  ForwardTrace<S> tr;
  tr.acts.resize(net.layers.size() + 1);
  tr.acts[0] = input;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    const TensorT<S>& in = tr.acts[i];
    TensorT<S>& out = tr.acts[i + 1];
    switch (l.spec.kind) {
      case LayerKind::Conv2d: conv2d_forward(l.spec, l.weight, l.bias, in, out); break;
      case LayerKind::Relu: relu_forward(in, out); break;
      case LayerKind::MaxPool2x2: maxpool_forward(in, out); break;
      case LayerKind::Flatten: flatten_forward(in, out); break;
      case LayerKind::Dense: dense_forward(l.spec, l.weight, l.bias, in, out); break;
    }
  }
  return tr;
}

// Extra gradient added to the output of layer `layer` before the backward
// sweep reaches it. This is how auxiliary losses on intermediate activations
// feed the chain rule.
template <typename S>
struct GradInjection {
  int layer = -1;
  TensorT<S> grad;
};

// Accumulates parameter gradients (allocating them if absent) and returns
// the gradient with respect to the input batch.
template <typename S>
TensorT<S> backward(NetworkT<S>& net, const ForwardTrace<S>& tr,
                    const TensorT<S>& grad_logits,
                    std::span<const GradInjection<S>> injections = {}) {
  const int L = static_cast<int>(net.layers.size());
  TensorT<S> g = grad_logits;
  for (int i = L - 1; i >= 0; --i) {
    // injections attach to the *output* of layer i, i.e. acts[i+1]
    for (const auto& inj : injections) {
      if (inj.layer == i) {
        if (inj.grad.shape != g.shape)
          throw ShapeError("backward: injection shape mismatch at layer " +
                           net.layers[i].spec.name);
        for (std::size_t j = 0; j < g.numel(); ++j) g.data[j] += inj.grad.data[j];
      }
    }
    auto& l = net.layers[i];
    const TensorT<S>& in = tr.acts[i];
    TensorT<S> gin;
    switch (l.spec.kind) {
      case LayerKind::Conv2d:
        l.weight.ensure_grad();
        l.bias.ensure_grad();
        conv2d_backward(l.spec, l.weight, in, g, l.weight, l.bias, gin);
        break;
      case LayerKind::Relu: relu_backward(in, g, gin); break;
      case LayerKind::MaxPool2x2: maxpool_backward(in, g, gin); break;
      case LayerKind::Flatten: flatten_backward(in, g, gin); break;
      case LayerKind::Dense:
        l.weight.ensure_grad();
        l.bias.ensure_grad();
        dense_backward(l.spec, l.weight, in, g, l.weight, l.bias, gin);
        break;
    }
    g = std::move(gin);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Activation capture: "neuron" = one output channel of a conv layer, its
// activation value is the flattened post-ReLU feature map, read from the
// relu that immediately follows the named conv layer.

struct ActivationTap {
  std::string layer_name;
  std::vector<int> channels;
};

// Index of the relu following conv layer `name`; throws if the layer is
// missing, not a conv, or not followed by a relu.
template <typename S>
int post_relu_index(const NetworkT<S>& net, const std::string& name) {
  int li = net.layer_index(name);
  if (li < 0) throw Error("unknown layer '" + name + "'");
  if (net.layers[li].spec.kind != LayerKind::Conv2d)
    throw Error("layer '" + name + "' is not conv2d");
  if (li + 1 >= static_cast<int>(net.layers.size()) ||
      net.layers[li + 1].spec.kind != LayerKind::Relu)
    throw Error("layer '" + name + "' has no following relu");
  return li + 1;
}

// captured[c][s] = flattened post-ReLU feature map of tap channel c for
// sample s. Parameters are untouched; the forward output is exactly the
// one an untapped forward produces.
template <typename S>
std::vector<std::vector<std::vector<S>>> capture_activations(
    const NetworkT<S>& net, const TensorT<S>& samples, const ActivationTap& tap) {
  const int relu_idx = post_relu_index(net, tap.layer_name);
  const int conv_idx = relu_idx - 1;
  const int C = net.layers[conv_idx].spec.out_channels;
  for (int c : tap.channels)
    if (c < 0 || c >= C)
      throw Error("capture: channel " + std::to_string(c) + " out of range for '" +
                  tap.layer_name + "' with " + std::to_string(C) + " channels");

  ForwardTrace<S> tr = forward(net, samples);
  const TensorT<S>& a = tr.acts[relu_idx + 1];
  const int N = a.dim(0), H = a.dim(2), W = a.dim(3);
  const std::size_t hw = static_cast<std::size_t>(H) * W;
  if (hw == 0) throw Error("capture: empty feature map at '" + tap.layer_name + "'");

  std::vector<std::vector<std::vector<S>>> captured(tap.channels.size());
  for (std::size_t ci = 0; ci < tap.channels.size(); ++ci) {
    captured[ci].resize(N);
    for (int n = 0; n < N; ++n) {
      const S* src =
          a.data.data() + (static_cast<std::size_t>(n) * a.dim(1) + tap.channels[ci]) * hw;
      captured[ci][n].assign(src, src + hw);
    }
  }
  return captured;
}

// ---------------------------------------------------------------------------
// Checkpoint persistence (float networks only).
// Format: "VNCK" | version u32 LE | tensor count u32 LE | per tensor:
// name length u16 LE, name bytes, ndim u8, dims u32 LE, raw f32 LE data.

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Network& net, const std::string& path);

// Loads parameters into a copy of `arch`; tensor names and shapes must
// match the architecture exactly. The input network itself is untouched.
Network load_checkpoint(const Network& arch, const std::string& path);

}  // namespace venom
