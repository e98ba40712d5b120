#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "venom/tensor.hpp"

namespace venom {

enum class LayerKind { Conv2d, Relu, MaxPool2x2, Flatten, Dense };

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::Relu: return "relu";
    case LayerKind::MaxPool2x2: return "maxpool2x2";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Dense: return "dense";
  }
  return "?";
}

struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  std::string name;
  // conv2d: stride is fixed at 1, zero padding of (kernel_size-1)/2 keeps
  // the spatial dims.
  int in_channels = 0;
  int out_channels = 0;
  int kernel_size = 0;
  // dense
  int in_features = 0;
  int out_features = 0;
};

template <typename S>
struct LayerT {
  LayerSpec spec;
  TensorT<S> weight;  // conv: (O,C,K,K); dense: (O,I)
  TensorT<S> bias;    // (O)

  bool has_params() const {
    return spec.kind == LayerKind::Conv2d || spec.kind == LayerKind::Dense;
  }
};

using Layer = LayerT<float>;

// ---------------------------------------------------------------------------
// conv2d, stride 1, zero padding (K-1)/2

template <typename S>
void conv2d_forward(const LayerSpec& sp, const TensorT<S>& w, const TensorT<S>& b,
                    const TensorT<S>& in, TensorT<S>& out) {
  const int N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  const int O = sp.out_channels, K = sp.kernel_size, P = (K - 1) / 2;
  if (C != sp.in_channels)
    throw ShapeError("conv2d '" + sp.name + "': input has " + std::to_string(C) +
                     " channels, expected " + std::to_string(sp.in_channels));
  out.shape = {N, O, H, W};
  out.data.assign(static_cast<std::size_t>(N) * O * H * W, S(0));

  for (int n = 0; n < N; ++n) {
    for (int o = 0; o < O; ++o) {
      S* out_map = out.data.data() + (static_cast<std::size_t>(n) * O + o) * H * W;
      const S bv = b.data[o];
      for (int i = 0; i < H * W; ++i) out_map[i] = bv;
      for (int c = 0; c < C; ++c) {
        const S* in_map = in.data.data() + (static_cast<std::size_t>(n) * C + c) * H * W;
        const S* w_map = w.data.data() + (static_cast<std::size_t>(o) * C + c) * K * K;
        for (int ky = 0; ky < K; ++ky) {
          const int dy = ky - P;
          const int y_lo = std::max(0, -dy), y_hi = std::min(H, H - dy);
          for (int kx = 0; kx < K; ++kx) {
            const int dx = kx - P;
            const S wv = w_map[ky * K + kx];
            const int x_lo = std::max(0, -dx), x_hi = std::min(W, W - dx);
            for (int y = y_lo; y < y_hi; ++y) {
              const S* in_row = in_map + (y + dy) * W + dx;
              S* out_row = out_map + y * W;
              for (int x = x_lo; x < x_hi; ++x) out_row[x] += wv * in_row[x];
            }
          }
        }
      }
    }
  }
}

template <typename S>
void conv2d_backward(const LayerSpec& sp, const TensorT<S>& w, const TensorT<S>& in,
                     const TensorT<S>& grad_out, TensorT<S>& grad_w,
                     TensorT<S>& grad_b, TensorT<S>& grad_in) {
  const int N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  const int O = sp.out_channels, K = sp.kernel_size, P = (K - 1) / 2;

  grad_in.shape = in.shape;
  grad_in.data.assign(in.numel(), S(0));

  for (int n = 0; n < N; ++n) {
    for (int o = 0; o < O; ++o) {
      const S* go_map =
          grad_out.data.data() + (static_cast<std::size_t>(n) * O + o) * H * W;
      S gb = S(0);
      for (int i = 0; i < H * W; ++i) gb += go_map[i];
      grad_b.grad[o] += gb;
      for (int c = 0; c < C; ++c) {
        const S* in_map = in.data.data() + (static_cast<std::size_t>(n) * C + c) * H * W;
        S* gi_map = grad_in.data.data() + (static_cast<std::size_t>(n) * C + c) * H * W;
        const S* w_map = w.data.data() + (static_cast<std::size_t>(o) * C + c) * K * K;
        S* gw_map = grad_w.grad.data() + (static_cast<std::size_t>(o) * C + c) * K * K;
        for (int ky = 0; ky < K; ++ky) {
          const int dy = ky - P;
          const int y_lo = std::max(0, -dy), y_hi = std::min(H, H - dy);
          for (int kx = 0; kx < K; ++kx) {
            const int dx = kx - P;
            const S wv = w_map[ky * K + kx];
            S gw = S(0);
            const int x_lo = std::max(0, -dx), x_hi = std::min(W, W - dx);
            for (int y = y_lo; y < y_hi; ++y) {
              const S* in_row = in_map + (y + dy) * W + dx;
              S* gi_row = gi_map + (y + dy) * W + dx;
              const S* go_row = go_map + y * W;
              for (int x = x_lo; x < x_hi; ++x) {
                gw += in_row[x] * go_row[x];
                gi_row[x] += wv * go_row[x];
              }
            }
            gw_map[ky * K + kx] += gw;
          }
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// relu

template <typename S>
void relu_forward(const TensorT<S>& in, TensorT<S>& out) {
  out.shape = in.shape;
  out.data.resize(in.numel());
  for (std::size_t i = 0; i < in.numel(); ++i)
    out.data[i] = in.data[i] > S(0) ? in.data[i] : S(0);
}

template <typename S>
void relu_backward(const TensorT<S>& in, const TensorT<S>& grad_out,
                   TensorT<S>& grad_in) {
  grad_in.shape = in.shape;
  grad_in.data.resize(in.numel());
  for (std::size_t i = 0; i < in.numel(); ++i)
    grad_in.data[i] = in.data[i] > S(0) ? grad_out.data[i] : S(0);
}

// ---------------------------------------------------------------------------
// maxpool 2x2, stride 2; spatial dims must be even. Ties go to the first
// element in (0,0),(0,1),(1,0),(1,1) scan order.

template <typename S>
void maxpool_forward(const TensorT<S>& in, TensorT<S>& out) {
  const int N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  if (H % 2 || W % 2)
    throw ShapeError("maxpool2x2: spatial dims must be even, got " +
                     shape_string(in.shape));
  const int Ho = H / 2, Wo = W / 2;
  out.shape = {N, C, Ho, Wo};
  out.data.resize(static_cast<std::size_t>(N) * C * Ho * Wo);
  std::size_t oi = 0;
  for (int nc = 0; nc < N * C; ++nc) {
    const S* m = in.data.data() + static_cast<std::size_t>(nc) * H * W;
    for (int y = 0; y < Ho; ++y) {
      for (int x = 0; x < Wo; ++x) {
        const S* p = m + (2 * y) * W + 2 * x;
        S v = p[0];
        if (p[1] > v) v = p[1];
        if (p[W] > v) v = p[W];
        if (p[W + 1] > v) v = p[W + 1];
        out.data[oi++] = v;
      }
    }
  }
}

template <typename S>
void maxpool_backward(const TensorT<S>& in, const TensorT<S>& grad_out,
                      TensorT<S>& grad_in) {
  const int N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  const int Ho = H / 2, Wo = W / 2;
  grad_in.shape = in.shape;
  grad_in.data.assign(in.numel(), S(0));
  std::size_t oi = 0;
  for (int nc = 0; nc < N * C; ++nc) {
    const S* m = in.data.data() + static_cast<std::size_t>(nc) * H * W;
    S* g = grad_in.data.data() + static_cast<std::size_t>(nc) * H * W;
    for (int y = 0; y < Ho; ++y) {
      for (int x = 0; x < Wo; ++x) {
        const std::size_t base = static_cast<std::size_t>(2 * y) * W + 2 * x;
        const int offs[4] = {0, 1, W, W + 1};
        int best = 0;
        for (int k = 1; k < 4; ++k)
          if (m[base + offs[k]] > m[base + offs[best]]) best = k;
        g[base + offs[best]] += grad_out.data[oi++];
      }
    }
  }
}

// ---------------------------------------------------------------------------
// flatten

template <typename S>
void flatten_forward(const TensorT<S>& in, TensorT<S>& out) {
  const int N = in.dim(0);
  int f = 1;
  for (std::size_t i = 1; i < in.shape.size(); ++i) f *= in.shape[i];
  out.shape = {N, f};
  out.data = in.data;
}

template <typename S>
void flatten_backward(const TensorT<S>& in, const TensorT<S>& grad_out,
                      TensorT<S>& grad_in) {
  grad_in.shape = in.shape;
  grad_in.data = grad_out.data;
}

// ---------------------------------------------------------------------------
// dense

template <typename S>
void dense_forward(const LayerSpec& sp, const TensorT<S>& w, const TensorT<S>& b,
                   const TensorT<S>& in, TensorT<S>& out) {
  const int N = in.dim(0), I = in.dim(1), O = sp.out_features;
  if (I != sp.in_features)
    throw ShapeError("dense '" + sp.name + "': input has " + std::to_string(I) +
                     " features, expected " + std::to_string(sp.in_features));
  out.shape = {N, O};
  out.data.resize(static_cast<std::size_t>(N) * O);
  for (int n = 0; n < N; ++n) {
    const S* x = in.data.data() + static_cast<std::size_t>(n) * I;
    S* y = out.data.data() + static_cast<std::size_t>(n) * O;
    for (int o = 0; o < O; ++o) {
      const S* wr = w.data.data() + static_cast<std::size_t>(o) * I;
      S acc = b.data[o];
      for (int i = 0; i < I; ++i) acc += wr[i] * x[i];
      y[o] = acc;
    }
  }
}

template <typename S>
void dense_backward(const LayerSpec& sp, const TensorT<S>& w, const TensorT<S>& in,
                    const TensorT<S>& grad_out, TensorT<S>& grad_w,
                    TensorT<S>& grad_b, TensorT<S>& grad_in) {
  const int N = in.dim(0), I = in.dim(1), O = sp.out_features;
  grad_in.shape = in.shape;
  grad_in.data.assign(in.numel(), S(0));
  for (int n = 0; n < N; ++n) {
    const S* x = in.data.data() + static_cast<std::size_t>(n) * I;
    const S* gy = grad_out.data.data() + static_cast<std::size_t>(n) * O;
    S* gx = grad_in.data.data() + static_cast<std::size_t>(n) * I;
    for (int o = 0; o < O; ++o) {
      const S g = gy[o];
      grad_b.grad[o] += g;
      const S* wr = w.data.data() + static_cast<std::size_t>(o) * I;
      S* gw = grad_w.grad.data() + static_cast<std::size_t>(o) * I;
      for (int i = 0; i < I; ++i) {
        gw[i] += g * x[i];
        gx[i] += g * wr[i];
      }
    }
  }
}

}  // namespace venom
