#pragma once

// Shared helpers for the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "venom/loss.hpp"
#include "venom/network.hpp"

namespace venom::testing {

// Widens a float network to the double shadow used by gradient oracles;
// float values are exactly representable, so both nets compute the same
// mathematical function.
inline NetworkT<double> widen(const Network& net) {
  NetworkT<double> out;
  out.in_channels = net.in_channels;
  out.in_height = net.in_height;
  out.in_width = net.in_width;
  out.num_classes = net.num_classes;
  for (const auto& l : net.layers) {
    LayerT<double> d;
    d.spec = l.spec;
    d.weight.shape = l.weight.shape;
    d.weight.data.assign(l.weight.data.begin(), l.weight.data.end());
    d.bias.shape = l.bias.shape;
    d.bias.data.assign(l.bias.data.begin(), l.bias.data.end());
    out.layers.push_back(std::move(d));
  }
  return out;
}

inline TensorT<double> widen(const Tensor& t) {
  TensorT<double> out;
  out.shape = t.shape;
  out.data.assign(t.data.begin(), t.data.end());
  return out;
}

template <typename S>
double loss_scalar(const NetworkT<S>& net, const TensorT<S>& inputs,
                   const std::vector<int>& labels, const JointLossSpec<S>& spec) {
  NetworkT<S> copy = net;
  BatchWork<S> w = forward_joint(copy, inputs, labels, spec);
  return static_cast<double>(spec.w1) * w.l1 + static_cast<double>(spec.w2) * w.l2_raw;
}

// Central finite differences over every parameter of a double network.
template <typename Eval>
std::vector<std::vector<double>> fd_param_grads(NetworkT<double>& net, double h,
                                                const Eval& eval) {
  std::vector<std::vector<double>> grads;
  for (auto& l : net.layers) {
    if (!l.has_params()) continue;
    for (TensorT<double>* p : {&l.weight, &l.bias}) {
      std::vector<double> g(p->numel());
      for (std::size_t i = 0; i < p->numel(); ++i) {
        const double keep = p->data[i];
        p->data[i] = keep + h;
        const double up = eval(net);
        p->data[i] = keep - h;
        const double down = eval(net);
        p->data[i] = keep;
        g[i] = (up - down) / (2.0 * h);
      }
      grads.push_back(std::move(g));
    }
  }
  return grads;
}

// Analytic parameter gradients in flat per-tensor order.
template <typename S>
std::vector<std::vector<double>> analytic_param_grads(const NetworkT<S>& net,
                                                      const TensorT<S>& inputs,
                                                      const std::vector<int>& labels,
                                                      const JointLossSpec<S>& spec) {
  NetworkT<S> copy = net;
  BatchWork<S> w = forward_joint(copy, inputs, labels, spec);
  backward_joint(copy, w, spec, spec.w1, spec.w2);
  std::vector<std::vector<double>> grads;
  for (const auto& l : copy.layers) {
    if (!l.has_params()) continue;
    for (const TensorT<S>* p : {&l.weight, &l.bias})
      grads.emplace_back(p->grad.begin(), p->grad.end());
  }
  return grads;
}

struct GradCompare {
  double worst_rel = 0.0;
  std::size_t checked = 0;
};

// Relative error with a floor tied to the largest gradient magnitude, so
// near-zero entries are judged on an absolute scale proportionate to the
// problem instead of blowing up the ratio.
inline GradCompare compare_grads(const std::vector<std::vector<double>>& analytic,
                                 const std::vector<std::vector<double>>& reference,
                                 double floor_scale = 1e-3) {
  double gmax = 0.0;
  for (const auto& t : reference)
    for (double v : t) gmax = std::max(gmax, std::abs(v));
  GradCompare res;
  const double floor = std::max(1e-12, floor_scale * gmax);
  for (std::size_t t = 0; t < analytic.size(); ++t)
    for (std::size_t i = 0; i < analytic[t].size(); ++i) {
      const double a = analytic[t][i], r = reference[t][i];
      const double denom = std::max({std::abs(a), std::abs(r), floor});
      res.worst_rel = std::max(res.worst_rel, std::abs(a - r) / denom);
      ++res.checked;
    }
  return res;
}

}  // namespace venom::testing
