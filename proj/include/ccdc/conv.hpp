#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ccdc/pattern.hpp"
#include "ccdc/tensor.hpp"

namespace ccdc {

inline int conv_out_extent(int in, int padding, int stride) {
  // 3x3 envelope for every pattern.
  const int span = in + 2 * padding - 3;
  if (span < 0) throw std::invalid_argument("conv: input extent " + std::to_string(in) + " too small for 3x3 envelope");
  return span / stride + 1;
}

// Convolution over a sampling pattern with a central-difference term:
//   y(p0) = sum_taps w(p_n) * x(p0 + p_n) + theta * (-x(p0) * sum_taps w(p_n))
// theta == 0 reduces to a plain sparse-pattern vanilla convolution; weights
// are shared between the two terms.
template <typename T>
struct ConvLayerT {
  SamplingPattern pattern;
  T theta = 0;
  int stride = 1;
  int padding = 1;
  bool has_bias = false;
  TensorT<T> weights;  // Cout x Cin x |taps|
  TensorT<T> bias;     // Cout

  // Training state owned by the layer.
  TensorT<T> d_weights;
  TensorT<T> d_bias;
  TensorT<T> in_cache;
  bool cached = false;

  std::size_t out_channels() const { return weights.shape[0]; }
  std::size_t in_channels() const { return weights.shape[1]; }
};

template <typename T>
struct ConvGradients {
  TensorT<T> d_weights;
  TensorT<T> d_input;
  TensorT<T> d_bias;
};

template <typename T>
ConvLayerT<T> make_conv_layer(const SamplingPattern& pat, std::size_t cout, std::size_t cin, T theta, int stride = 1,
                              int padding = 1, bool with_bias = false) {
  ConvLayerT<T> layer;
  layer.pattern = pat;
  layer.theta = theta;
  layer.stride = stride;
  layer.padding = padding;
  layer.has_bias = with_bias;
  layer.weights = TensorT<T>({cout, cin, pat.tap_count()});
  layer.d_weights = TensorT<T>(layer.weights.shape);
  if (with_bias) {
    layer.bias = TensorT<T>({cout});
    layer.d_bias = TensorT<T>({cout});
  }
  return layer;
}

// Kaiming-style init with fan-in counting only the sampled taps.
template <typename T>
void kaiming_init(ConvLayerT<T>& layer, Rng& rng) {
  const double fan_in = static_cast<double>(layer.in_channels() * layer.pattern.tap_count());
  const double std = std::sqrt(2.0 / fan_in);
  layer.weights = rand_normal<T>(rng, layer.weights.shape, 0.0, std);
}

namespace detail {

inline int ceil_div(int a, int b) { return a > 0 ? (a + b - 1) / b : a / b; }

// Inclusive output-column range such that ix = ox*stride + off stays in [0, w).
inline void col_range(int off, int stride, int w, int ow, int& lo, int& hi) {
  lo = std::max(0, ceil_div(-off, stride));
  hi = std::min(ow - 1, (w - 1 - off) / stride);
  if (w - 1 - off < 0) hi = -1;
}

template <typename T>
void check_conv_input(const ConvLayerT<T>& layer, const TensorT<T>& x) {
  if (x.ndim() != 4) throw std::invalid_argument("conv: input must be NCHW, got " + shape_to_string(x.shape));
  if (x.c() != layer.in_channels()) {
    throw std::invalid_argument("conv: channel mismatch, layer expects " + std::to_string(layer.in_channels()) +
                                " input channels, got " + std::to_string(x.c()));
  }
}

}  // namespace detail

// Direct path: literal evaluation of the operator definition. Per output
// element the vanilla taps accumulate in (channel, tap) order, then the
// center-difference plane is added with a single multiply by theta.
template <typename T>
TensorT<T> conv_forward_direct(const ConvLayerT<T>& layer, const TensorT<T>& x) {
  detail::check_conv_input(layer, x);
  const int N = static_cast<int>(x.n()), Cin = static_cast<int>(x.c());
  const int H = static_cast<int>(x.h()), W = static_cast<int>(x.w());
  const int Cout = static_cast<int>(layer.out_channels());
  const int s = layer.stride, p = layer.padding;
  const int OH = conv_out_extent(H, p, s), OW = conv_out_extent(W, p, s);
  const std::size_t K = layer.pattern.tap_count();
  TensorT<T> y({static_cast<std::size_t>(N), static_cast<std::size_t>(Cout), static_cast<std::size_t>(OH),
                static_cast<std::size_t>(OW)});
  std::vector<T> center(static_cast<std::size_t>(OH) * OW);

  for (int n = 0; n < N; ++n) {
    for (int o = 0; o < Cout; ++o) {
      T* yo = y.plane(n, o);
      for (int i = 0; i < Cin; ++i) {
        const T* xi = x.plane(n, i);
        const T* w = layer.weights.data.data() + (static_cast<std::size_t>(o) * Cin + i) * K;
        for (std::size_t t = 0; t < K; ++t) {
          const auto [dy, dx] = layer.pattern.taps[t];
          const T wv = w[t];
          const int xoff = 1 - p + dx;
          int lo, hi;
          detail::col_range(xoff, s, W, OW, lo, hi);
          for (int oy = 0; oy < OH; ++oy) {
            const int iy = oy * s + 1 - p + dy;
            if (iy < 0 || iy >= H) continue;
            T* yrow = yo + static_cast<std::size_t>(oy) * OW;
            const T* xrow = xi + static_cast<std::size_t>(iy) * W + xoff;
            if (s == 1) {
              for (int ox = lo; ox <= hi; ++ox) yrow[ox] += wv * xrow[ox];
            } else {
              for (int ox = lo; ox <= hi; ++ox) yrow[ox] += wv * xrow[static_cast<std::size_t>(ox) * s];
            }
          }
        }
      }
      if (layer.theta != T(0)) {
        std::fill(center.begin(), center.end(), T(0));
        for (int i = 0; i < Cin; ++i) {
          const T* xi = x.plane(n, i);
          const T* w = layer.weights.data.data() + (static_cast<std::size_t>(o) * Cin + i) * K;
          T wsum = 0;
          for (std::size_t t = 0; t < K; ++t) wsum += w[t];
          const int xoff = 1 - p;
          int lo, hi;
          detail::col_range(xoff, s, W, OW, lo, hi);
          for (int oy = 0; oy < OH; ++oy) {
            const int cy = oy * s + 1 - p;
            if (cy < 0 || cy >= H) continue;
            T* crow = center.data() + static_cast<std::size_t>(oy) * OW;
            const T* xrow = xi + static_cast<std::size_t>(cy) * W + xoff;
            for (int ox = lo; ox <= hi; ++ox) crow[ox] += wsum * xrow[static_cast<std::size_t>(ox) * s];
          }
        }
        for (std::size_t k = 0; k < center.size(); ++k) yo[k] += layer.theta * (-center[k]);
      }
      if (layer.has_bias) {
        const T b = layer.bias.data[static_cast<std::size_t>(o)];
        for (std::size_t k = 0; k < static_cast<std::size_t>(OH) * OW; ++k) yo[k] += b;
      }
    }
  }
  return y;
}

// Plain sparse-pattern vanilla convolution (no central term). Taps
// accumulate in (tap, channel) order, deliberately distinct from the
// direct path's ordering.
template <typename T>
TensorT<T> conv_forward_vanilla(const ConvLayerT<T>& layer, const TensorT<T>& x) {
  detail::check_conv_input(layer, x);
  const int N = static_cast<int>(x.n()), Cin = static_cast<int>(x.c());
  const int H = static_cast<int>(x.h()), W = static_cast<int>(x.w());
  const int Cout = static_cast<int>(layer.out_channels());
  const int s = layer.stride, p = layer.padding;
  const int OH = conv_out_extent(H, p, s), OW = conv_out_extent(W, p, s);
  const std::size_t K = layer.pattern.tap_count();
  TensorT<T> y({static_cast<std::size_t>(N), static_cast<std::size_t>(Cout), static_cast<std::size_t>(OH),
                static_cast<std::size_t>(OW)});
  for (int n = 0; n < N; ++n) {
    for (int o = 0; o < Cout; ++o) {
      T* yo = y.plane(n, o);
      for (std::size_t t = 0; t < K; ++t) {
        const auto [dy, dx] = layer.pattern.taps[t];
        const int xoff = 1 - p + dx;
        int lo, hi;
        detail::col_range(xoff, s, W, OW, lo, hi);
        for (int i = 0; i < Cin; ++i) {
          const T* xi = x.plane(n, i);
          const T wv = layer.weights.data[(static_cast<std::size_t>(o) * Cin + i) * K + t];
          for (int oy = 0; oy < OH; ++oy) {
            const int iy = oy * s + 1 - p + dy;
            if (iy < 0 || iy >= H) continue;
            T* yrow = yo + static_cast<std::size_t>(oy) * OW;
            const T* xrow = xi + static_cast<std::size_t>(iy) * W + xoff;
            for (int ox = lo; ox <= hi; ++ox) yrow[ox] += wv * xrow[static_cast<std::size_t>(ox) * s];
          }
        }
      }
      if (layer.has_bias) {
        const T b = layer.bias.data[static_cast<std::size_t>(o)];
        for (std::size_t k = 0; k < static_cast<std::size_t>(OH) * OW; ++k) yo[k] += b;
      }
    }
  }
  return y;
}

// Decomposed path: vanilla convolution plus theta times a rank-one
// correction, a 1x1 convolution of x by the per-(Cout,Cin) kernel sums.
template <typename T>
TensorT<T> conv_forward_decomposed(const ConvLayerT<T>& layer, const TensorT<T>& x) {
  TensorT<T> y = conv_forward_vanilla(layer, x);
  if (layer.theta == T(0)) return y;
  const int N = static_cast<int>(x.n()), Cin = static_cast<int>(x.c());
  const int H = static_cast<int>(x.h()), W = static_cast<int>(x.w());
  const int Cout = static_cast<int>(layer.out_channels());
  const int s = layer.stride, p = layer.padding;
  const int OH = conv_out_extent(H, p, s), OW = conv_out_extent(W, p, s);
  const std::size_t K = layer.pattern.tap_count();
  // Kernel sums per (Cout, Cin).
  std::vector<T> wsum(static_cast<std::size_t>(Cout) * Cin);
  for (int o = 0; o < Cout; ++o) {
    for (int i = 0; i < Cin; ++i) {
      T acc = 0;
      const T* w = layer.weights.data.data() + (static_cast<std::size_t>(o) * Cin + i) * K;
      for (std::size_t t = 0; t < K; ++t) acc += w[t];
      wsum[static_cast<std::size_t>(o) * Cin + i] = acc;
    }
  }
  const int xoff = 1 - p;
  int lo, hi;
  detail::col_range(xoff, s, W, OW, lo, hi);
  std::vector<T> corr(static_cast<std::size_t>(OH) * OW);
  for (int n = 0; n < N; ++n) {
    for (int o = 0; o < Cout; ++o) {
      std::fill(corr.begin(), corr.end(), T(0));
      for (int i = 0; i < Cin; ++i) {
        const T* xi = x.plane(n, i);
        const T sw = wsum[static_cast<std::size_t>(o) * Cin + i];
        for (int oy = 0; oy < OH; ++oy) {
          const int cy = oy * s + 1 - p;
          if (cy < 0 || cy >= H) continue;
          T* crow = corr.data() + static_cast<std::size_t>(oy) * OW;
          const T* xrow = xi + static_cast<std::size_t>(cy) * W + xoff;
          for (int ox = lo; ox <= hi; ++ox) crow[ox] += sw * xrow[static_cast<std::size_t>(ox) * s];
        }
      }
      T* yo = y.plane(n, o);
      for (std::size_t k = 0; k < corr.size(); ++k) yo[k] += layer.theta * (-corr[k]);
    }
  }
  return y;
}

// Analytic gradients:
//   d_weights[o,i,n] = sum_{batch,p0} d_out(o,p0) * (x(i,p0+p_n) - theta*x(i,p0))
//   d_input is the transposed accumulation including the -theta*sum(w)
//   center contribution.
template <typename T>
ConvGradients<T> conv_backward(const ConvLayerT<T>& layer, const TensorT<T>& x, const TensorT<T>& d_out) {
  detail::check_conv_input(layer, x);
  const int N = static_cast<int>(x.n()), Cin = static_cast<int>(x.c());
  const int H = static_cast<int>(x.h()), W = static_cast<int>(x.w());
  const int Cout = static_cast<int>(layer.out_channels());
  const int s = layer.stride, p = layer.padding;
  const int OH = conv_out_extent(H, p, s), OW = conv_out_extent(W, p, s);
  const std::size_t K = layer.pattern.tap_count();
  if (d_out.ndim() != 4 || static_cast<int>(d_out.n()) != N || static_cast<int>(d_out.c()) != Cout ||
      static_cast<int>(d_out.h()) != OH || static_cast<int>(d_out.w()) != OW) {
    throw std::invalid_argument("conv_backward: d_out shape " + shape_to_string(d_out.shape) +
                                " does not match forward output [" + std::to_string(N) + "," + std::to_string(Cout) +
                                "," + std::to_string(OH) + "," + std::to_string(OW) + "]");
  }

  ConvGradients<T> g;
  g.d_weights = TensorT<T>(layer.weights.shape);
  g.d_input = TensorT<T>(x.shape);
  if (layer.has_bias) g.d_bias = TensorT<T>({static_cast<std::size_t>(Cout)});

  const int coff = 1 - p;
  int clo, chi;
  detail::col_range(coff, s, W, OW, clo, chi);

  // d_weights: correlate d_out with the tap-shifted input; the -theta*x(p0)
  // part is shared by every tap of an (o,i) pair.
  for (int o = 0; o < Cout; ++o) {
    for (int i = 0; i < Cin; ++i) {
      T center_corr = 0;
      if (layer.theta != T(0)) {
        for (int n = 0; n < N; ++n) {
          const T* dyo = d_out.plane(n, o);
          const T* xi = x.plane(n, i);
          for (int oy = 0; oy < OH; ++oy) {
            const int cy = oy * s + 1 - p;
            if (cy < 0 || cy >= H) continue;
            const T* drow = dyo + static_cast<std::size_t>(oy) * OW;
            const T* xrow = xi + static_cast<std::size_t>(cy) * W + coff;
            for (int ox = clo; ox <= chi; ++ox) center_corr += drow[ox] * xrow[static_cast<std::size_t>(ox) * s];
          }
        }
      }
      for (std::size_t t = 0; t < K; ++t) {
        const auto [dy, dx] = layer.pattern.taps[t];
        const int xoff = 1 - p + dx;
        int lo, hi;
        detail::col_range(xoff, s, W, OW, lo, hi);
        T acc = 0;
        for (int n = 0; n < N; ++n) {
          const T* dyo = d_out.plane(n, o);
          const T* xi = x.plane(n, i);
          for (int oy = 0; oy < OH; ++oy) {
            const int iy = oy * s + 1 - p + dy;
            if (iy < 0 || iy >= H) continue;
            const T* drow = dyo + static_cast<std::size_t>(oy) * OW;
            const T* xrow = xi + static_cast<std::size_t>(iy) * W + xoff;
            for (int ox = lo; ox <= hi; ++ox) acc += drow[ox] * xrow[static_cast<std::size_t>(ox) * s];
          }
        }
        g.d_weights.data[(static_cast<std::size_t>(o) * Cin + i) * K + t] = acc - layer.theta * center_corr;
      }
    }
  }

  // d_input: scatter d_out through the taps plus the center term.
  for (int n = 0; n < N; ++n) {
    for (int i = 0; i < Cin; ++i) {
      T* dxi = g.d_input.plane(n, i);
      for (int o = 0; o < Cout; ++o) {
        const T* dyo = d_out.plane(n, o);
        const T* w = layer.weights.data.data() + (static_cast<std::size_t>(o) * Cin + i) * K;
        for (std::size_t t = 0; t < K; ++t) {
          const auto [dy, dx] = layer.pattern.taps[t];
          const int xoff = 1 - p + dx;
          int lo, hi;
          detail::col_range(xoff, s, W, OW, lo, hi);
          const T wv = w[t];
          for (int oy = 0; oy < OH; ++oy) {
            const int iy = oy * s + 1 - p + dy;
            if (iy < 0 || iy >= H) continue;
            const T* drow = dyo + static_cast<std::size_t>(oy) * OW;
            T* xrow = dxi + static_cast<std::size_t>(iy) * W + xoff;
            for (int ox = lo; ox <= hi; ++ox) xrow[static_cast<std::size_t>(ox) * s] += wv * drow[ox];
          }
        }
        if (layer.theta != T(0)) {
          T wsum = 0;
          for (std::size_t t = 0; t < K; ++t) wsum += w[t];
          const T cw = -layer.theta * wsum;
          for (int oy = 0; oy < OH; ++oy) {
            const int cy = oy * s + 1 - p;
            if (cy < 0 || cy >= H) continue;
            const T* drow = dyo + static_cast<std::size_t>(oy) * OW;
            T* xrow = dxi + static_cast<std::size_t>(cy) * W + coff;
            for (int ox = clo; ox <= chi; ++ox) xrow[static_cast<std::size_t>(ox) * s] += cw * drow[ox];
          }
        }
      }
    }
  }

  if (layer.has_bias) {
    for (int o = 0; o < Cout; ++o) {
      T acc = 0;
      for (int n = 0; n < N; ++n) {
        const T* dyo = d_out.plane(n, o);
        for (std::size_t k = 0; k < static_cast<std::size_t>(OH) * OW; ++k) acc += dyo[k];
      }
      g.d_bias.data[static_cast<std::size_t>(o)] = acc;
    }
  }
  return g;
}

// Conv-kernel weight count (no bias, no batch norm), the Table-1 accounting.
inline long long conv_param_count(std::size_t cout, std::size_t cin, std::size_t taps) {
  return static_cast<long long>(cout) * static_cast<long long>(cin) * static_cast<long long>(taps);
}

// Multiply-accumulates over sampled taps, output positions and channel pairs.
inline long long conv_mac_count(std::size_t cout, std::size_t cin, std::size_t taps, long long out_positions) {
  return conv_param_count(cout, cin, taps) * out_positions;
}

// FLOPs = 2 per MAC, plus one central-difference subtraction per sampled tap
// when theta > 0.
inline long long conv_flop_count(std::size_t cout, std::size_t cin, std::size_t taps, long long out_positions,
                                 double theta) {
  const long long macs = conv_mac_count(cout, cin, taps, out_positions);
  return 2 * macs + (theta > 0 ? macs : 0);
}

}  // namespace ccdc
