#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "venom/network.hpp"

namespace venom {

enum class LossKind {
  CrossEntropyMean,  // mean over the batch, fused log-sum-exp softmax
  SquareSum,         // sum of squared logits; test surrogate head
};

// One batch member whose activation behavior imitates a reference sample:
// `unit_refs` holds, per tap channel, the l2-normalized reference
// activation vector (zero vectors stay zero).
template <typename S>
struct ImitationTarget {
  int sample = -1;
  const std::vector<std::vector<S>>* unit_refs = nullptr;
};

// Weighted loss specification for one forward/backward:
//   total = w1 * task_loss + w2 * imitation_loss
// The imitation term reads the post-ReLU feature maps of `tap_channels` at
// the relu layer index `tap_relu` (see post_relu_index).
template <typename S>
struct JointLossSpec {
  LossKind kind = LossKind::CrossEntropyMean;
  S w1 = S(1);
  S w2 = S(0);
  int tap_relu = -1;
  std::vector<int> tap_channels;
  std::vector<ImitationTarget<S>> targets;
};

template <typename S>
struct BatchWork {
  ForwardTrace<S> trace;
  double l1 = 0.0;      // task loss
  double l2_raw = 0.0;  // imitation loss, unweighted
  int correct = 0;      // argmax == label count (cross-entropy only)
  // cached per (target, channel): unit vector u and sign(u - v)
  std::vector<std::vector<std::vector<S>>> unit;
  std::vector<std::vector<std::vector<S>>> sign;
  std::vector<std::vector<S>> norm;
  std::vector<int> labels;
};

template <typename S>
int argmax_row(const TensorT<S>& logits, int row) {
  const int C = logits.dim(1);
  const S* z = logits.data.data() + static_cast<std::size_t>(row) * C;
  int best = 0;
  for (int c = 1; c < C; ++c)
    if (z[c] > z[best]) best = c;
  return best;
}

// Forward pass plus both loss terms. Gradients are not touched; call
// backward_joint with the weights once they are known (the training
// schedule needs the raw losses before it can weight them).
template <typename S>
BatchWork<S> forward_joint(const NetworkT<S>& net, const TensorT<S>& inputs,
                           std::span<const int> labels, const JointLossSpec<S>& spec) {
  BatchWork<S> work;
  work.trace = forward(net, inputs);
  work.labels.assign(labels.begin(), labels.end());
  const TensorT<S>& logits = work.trace.logits();
  const int N = logits.dim(0), C = logits.dim(1);

  if (spec.kind == LossKind::CrossEntropyMean) {
    if (static_cast<int>(labels.size()) != N)
      throw ShapeError("loss: batch has " + std::to_string(N) + " rows but " +
                       std::to_string(labels.size()) + " labels");
    double total = 0.0;
    for (int n = 0; n < N; ++n) {
      const int y = labels[n];
      if (y < 0 || y >= C) throw Error("loss: label " + std::to_string(y) + " out of range");
      const S* z = logits.data.data() + static_cast<std::size_t>(n) * C;
      S m = z[0];
      for (int c = 1; c < C; ++c)
        if (z[c] > m) m = z[c];
      S sum = S(0);
      for (int c = 0; c < C; ++c) sum += std::exp(z[c] - m);
      total += static_cast<double>(m + std::log(sum) - z[y]);
      if (argmax_row(logits, n) == y) ++work.correct;
    }
    work.l1 = total / N;
  } else {
    double total = 0.0;
    for (S z : logits.data) total += static_cast<double>(z) * z;
    work.l1 = total;
  }

  if (!spec.targets.empty()) {
    if (spec.tap_relu < 0) throw Error("loss: imitation targets without a tap layer");
    const TensorT<S>& a = work.trace.acts[spec.tap_relu + 1];
    const int AC = a.dim(1);
    const std::size_t hw = static_cast<std::size_t>(a.dim(2)) * a.dim(3);
    const std::size_t T = spec.targets.size();
    const std::size_t K = spec.tap_channels.size();
    work.unit.resize(T);
    work.sign.resize(T);
    work.norm.resize(T);
    double l2 = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const auto& tgt = spec.targets[t];
      work.unit[t].resize(K);
      work.sign[t].resize(K);
      work.norm[t].assign(K, S(0));
      for (std::size_t k = 0; k < K; ++k) {
        const S* sigma =
            a.data.data() +
            (static_cast<std::size_t>(tgt.sample) * AC + spec.tap_channels[k]) * hw;
        double nrm2 = 0.0;
        for (std::size_t d = 0; d < hw; ++d)
          nrm2 += static_cast<double>(sigma[d]) * sigma[d];
        const S nrm = static_cast<S>(std::sqrt(nrm2));
        work.norm[t][k] = nrm;
        auto& u = work.unit[t][k];
        auto& sg = work.sign[t][k];
        u.resize(hw);
        sg.resize(hw);
        const std::vector<S>& v = (*tgt.unit_refs)[k];
        double term = 0.0;
        for (std::size_t d = 0; d < hw; ++d) {
          const S ud = nrm > S(0) ? sigma[d] / nrm : S(0);
          u[d] = ud;
          const S diff = ud - v[d];
          sg[d] = diff > S(0) ? S(1) : (diff < S(0) ? S(-1) : S(0));
          term += std::abs(static_cast<double>(diff));
        }
        l2 += term;
      }
    }
    work.l2_raw = l2;
  }
  return work;
}

// Accumulates d(w1*L1 + w2*L2)/dparam into the network's grad buffers and
// returns the input-batch gradient.
template <typename S>
TensorT<S> backward_joint(NetworkT<S>& net, const BatchWork<S>& work,
                          const JointLossSpec<S>& spec, S w1, S w2) {
  const TensorT<S>& logits = work.trace.logits();
  const int N = logits.dim(0), C = logits.dim(1);
  TensorT<S> gz(logits.shape);

  if (spec.kind == LossKind::CrossEntropyMean) {
    const S inv_n = w1 / static_cast<S>(N);
    for (int n = 0; n < N; ++n) {
      const S* z = logits.data.data() + static_cast<std::size_t>(n) * C;
      S* g = gz.data.data() + static_cast<std::size_t>(n) * C;
      S m = z[0];
      for (int c = 1; c < C; ++c)
        if (z[c] > m) m = z[c];
      S sum = S(0);
      for (int c = 0; c < C; ++c) {
        g[c] = std::exp(z[c] - m);
        sum += g[c];
      }
      for (int c = 0; c < C; ++c) g[c] = g[c] / sum * inv_n;
      g[work.labels[n]] -= inv_n;
    }
  } else {
    for (std::size_t i = 0; i < logits.numel(); ++i)
      gz.data[i] = S(2) * logits.data[i] * w1;
  }

  std::vector<GradInjection<S>> injections;
  if (!spec.targets.empty() && w2 != S(0)) {
    const TensorT<S>& a = work.trace.acts[spec.tap_relu + 1];
    const int AC = a.dim(1);
    const std::size_t hw = static_cast<std::size_t>(a.dim(2)) * a.dim(3);
    GradInjection<S> inj;
    inj.layer = spec.tap_relu;
    inj.grad.shape = a.shape;
    inj.grad.data.assign(a.numel(), S(0));
    for (std::size_t t = 0; t < spec.targets.size(); ++t) {
      const auto& tgt = spec.targets[t];
      for (std::size_t k = 0; k < spec.tap_channels.size(); ++k) {
        const S nrm = work.norm[t][k];
        if (nrm <= S(0)) continue;  // zero activation: flat by convention
        const auto& u = work.unit[t][k];
        const auto& sg = work.sign[t][k];
        S su = S(0);
        for (std::size_t d = 0; d < hw; ++d) su += sg[d] * u[d];
        S* g = inj.grad.data.data() +
               (static_cast<std::size_t>(tgt.sample) * AC + spec.tap_channels[k]) * hw;
        for (std::size_t d = 0; d < hw; ++d)
          g[d] += w2 * (sg[d] - su * u[d]) / nrm;
      }
    }
    injections.push_back(std::move(inj));
  }
  return backward(net, work.trace, gz,
                  std::span<const GradInjection<S>>(injections));
}

// Convenience single-shot form with fixed weights. Returns the weighted
// total; parameter grads are accumulated into the network.
template <typename S>
struct LossValue {
  double total = 0.0;
  double l1 = 0.0;
  double l2_raw = 0.0;
  int correct = 0;
};

template <typename S>
LossValue<S> forward_backward(NetworkT<S>& net, const TensorT<S>& inputs,
                              std::span<const int> labels,
                              const JointLossSpec<S>& spec) {
  if (!std::isfinite(static_cast<double>(spec.w1)) ||
      !std::isfinite(static_cast<double>(spec.w2)))
    throw NumericError("loss weights must be finite");
  BatchWork<S> work = forward_joint(net, inputs, labels, spec);
  LossValue<S> lv;
  lv.l1 = work.l1;
  lv.l2_raw = work.l2_raw;
  lv.correct = work.correct;
  lv.total = static_cast<double>(spec.w1) * work.l1 +
             static_cast<double>(spec.w2) * work.l2_raw;
  if (!std::isfinite(lv.total)) throw NumericError("non-finite loss");
  backward_joint(net, work, spec, spec.w1, spec.w2);
  return lv;
}

}  // namespace venom
