#pragma once

#include <cmath>
#include <vector>

#include "venom/network.hpp"

namespace venom {

// SGD with momentum and decoupled-from-nothing weight decay: the decay term
// joins the gradient before entering the velocity, the most common coupling.
//   v <- momentum * v + (g + weight_decay * w);  w <- w - lr * v
template <typename S>
struct SgdStateT {
  S learning_rate_base = S(0.01);
  S momentum = S(0.9);
  S weight_decay = S(5e-4);
  // one velocity per parameter tensor, in layer order (weight then bias)
  std::vector<TensorT<S>> velocity;

  void init_for(const NetworkT<S>& net) {
    velocity.clear();
    for (const auto& l : net.layers) {
      if (!l.has_params()) continue;
      velocity.emplace_back(l.weight.shape);
      velocity.emplace_back(l.bias.shape);
    }
  }
};

using SgdState = SgdStateT<float>;

template <typename S>
void sgd_update(SgdStateT<S>& st, NetworkT<S>& net, S learning_rate) {
  std::size_t vi = 0;
  for (auto& l : net.layers) {
    if (!l.has_params()) continue;
    for (TensorT<S>* p : {&l.weight, &l.bias}) {
      if (!p->has_grad())
        throw Error("sgd_update: no gradients for '" + l.spec.name +
                    "' (step without backward)");
      TensorT<S>& v = st.velocity.at(vi++);
      for (std::size_t i = 0; i < p->numel(); ++i) {
        v.data[i] = st.momentum * v.data[i] +
                    (p->grad[i] + st.weight_decay * p->data[i]);
        p->data[i] -= learning_rate * v.data[i];
      }
      p->clear_grad();
    }
  }
}

// base_lr * 0.5 * (1 + cos(pi * step / total_steps))
inline double cosine_lr(long step, long total_steps, double base_lr) {
  if (total_steps < 1) throw Error("cosine_lr: total_steps must be >= 1");
  if (step < 0 || step > total_steps)
    throw Error("cosine_lr: step " + std::to_string(step) + " outside [0, " +
                std::to_string(total_steps) + "]");
  return base_lr * 0.5 *
         (1.0 + std::cos(3.14159265358979323846 * static_cast<double>(step) /
                         static_cast<double>(total_steps)));
}

}  // namespace venom
