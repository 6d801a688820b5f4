#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ccdc/conv.hpp"
#include "ccdc/netspec.hpp"
#include "ccdc/optim.hpp"
#include "ccdc/pattern.hpp"
#include "ccdc/tensor.hpp"

namespace ccdc {

enum class Mode { Train, Eval };

// Batch norm over NCHW channels. Train mode normalizes with batch statistics
// (biased variance) and folds them into the running estimates (unbiased);
// eval mode uses the running estimates and mutates nothing.
template <typename T>
struct BatchNormT {
  TensorT<T> gamma, beta, running_mean, running_var;
  TensorT<T> d_gamma, d_beta;
  double momentum = 0.1;
  double epsilon = 1e-5;

  TensorT<T> x_hat;
  std::vector<double> inv_std;
  bool cached = false;

  explicit BatchNormT(std::size_t channels = 1)
      : gamma({channels}, T(1)),
        beta({channels}),
        running_mean({channels}),
        running_var({channels}, T(1)),
        d_gamma({channels}),
        d_beta({channels}) {}

  std::size_t channels() const { return gamma.shape[0]; }

  TensorT<T> forward(const TensorT<T>& x, Mode mode) {
    if (x.ndim() != 4 || x.c() != channels()) {
      throw std::invalid_argument("batchnorm: expected NCHW with " + std::to_string(channels()) + " channels, got " +
                                  shape_to_string(x.shape));
    }
    const std::size_t N = x.n(), C = x.c(), HW = x.h() * x.w();
    const double m = static_cast<double>(N * HW);
    TensorT<T> y(x.shape);
    if (mode == Mode::Train) {
      x_hat = TensorT<T>(x.shape);
      inv_std.assign(C, 0.0);
      for (std::size_t c = 0; c < C; ++c) {
        double sum = 0, sq = 0;
        for (std::size_t n = 0; n < N; ++n) {
          const T* p = x.plane(n, c);
          for (std::size_t k = 0; k < HW; ++k) {
            sum += p[k];
            sq += static_cast<double>(p[k]) * p[k];
          }
        }
        const double mean = sum / m;
        const double var = sq / m - mean * mean;
        const double istd = 1.0 / std::sqrt(var + epsilon);
        inv_std[c] = istd;
        const double g = gamma.data[c], b = beta.data[c];
        for (std::size_t n = 0; n < N; ++n) {
          const T* p = x.plane(n, c);
          T* xh = x_hat.plane(n, c);
          T* yp = y.plane(n, c);
          for (std::size_t k = 0; k < HW; ++k) {
            const double h = (p[k] - mean) * istd;
            xh[k] = static_cast<T>(h);
            yp[k] = static_cast<T>(g * h + b);
          }
        }
        const double unbiased = m > 1 ? var * m / (m - 1.0) : var;
        running_mean.data[c] = static_cast<T>((1.0 - momentum) * running_mean.data[c] + momentum * mean);
        running_var.data[c] = static_cast<T>((1.0 - momentum) * running_var.data[c] + momentum * unbiased);
      }
      cached = true;
    } else {
      for (std::size_t c = 0; c < C; ++c) {
        const double mean = running_mean.data[c];
        const double istd = 1.0 / std::sqrt(static_cast<double>(running_var.data[c]) + epsilon);
        const double g = gamma.data[c], b = beta.data[c];
        for (std::size_t n = 0; n < N; ++n) {
          const T* p = x.plane(n, c);
          T* yp = y.plane(n, c);
          for (std::size_t k = 0; k < HW; ++k) yp[k] = static_cast<T>(g * ((p[k] - mean) * istd) + b);
        }
      }
    }
    return y;
  }

  TensorT<T> backward(const TensorT<T>& d_out) {
    if (!cached) throw std::runtime_error("batchnorm: backward without a cached train-mode forward");
    if (!d_out.same_shape(x_hat)) {
      throw std::invalid_argument("batchnorm: d_out shape " + shape_to_string(d_out.shape) + " does not match forward");
    }
    const std::size_t N = d_out.n(), C = d_out.c(), HW = d_out.h() * d_out.w();
    const double m = static_cast<double>(N * HW);
    TensorT<T> dx(d_out.shape);
    for (std::size_t c = 0; c < C; ++c) {
      double sum_dy = 0, sum_dy_xh = 0;
      for (std::size_t n = 0; n < N; ++n) {
        const T* dy = d_out.plane(n, c);
        const T* xh = x_hat.plane(n, c);
        for (std::size_t k = 0; k < HW; ++k) {
          sum_dy += dy[k];
          sum_dy_xh += static_cast<double>(dy[k]) * xh[k];
        }
      }
      d_gamma.data[c] += static_cast<T>(sum_dy_xh);
      d_beta.data[c] += static_cast<T>(sum_dy);
      const double scale = static_cast<double>(gamma.data[c]) * inv_std[c] / m;
      for (std::size_t n = 0; n < N; ++n) {
        const T* dy = d_out.plane(n, c);
        const T* xh = x_hat.plane(n, c);
        T* dp = dx.plane(n, c);
        for (std::size_t k = 0; k < HW; ++k) {
          dp[k] = static_cast<T>(scale * (m * dy[k] - sum_dy - xh[k] * sum_dy_xh));
        }
      }
    }
    return dx;
  }
};

// 3x3 max pooling, stride 2, pad 1 (padding never wins the max).
template <typename T>
struct MaxPoolT {
  std::vector<std::size_t> in_shape;
  std::vector<std::uint32_t> argmax;  // flat plane index of each output's source
  bool cached = false;

  TensorT<T> forward(const TensorT<T>& x, Mode mode) {
    if (x.ndim() != 4) throw std::invalid_argument("maxpool: expected NCHW, got " + shape_to_string(x.shape));
    const int H = static_cast<int>(x.h()), W = static_cast<int>(x.w());
    const int OH = conv_out_extent(H, 1, 2), OW = conv_out_extent(W, 1, 2);
    const std::size_t N = x.n(), C = x.c();
    TensorT<T> y({N, C, static_cast<std::size_t>(OH), static_cast<std::size_t>(OW)});
    const bool keep = mode == Mode::Train;
    if (keep) {
      in_shape = x.shape;
      argmax.assign(N * C * static_cast<std::size_t>(OH) * OW, 0);
    }
    std::size_t out_at = 0;
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t c = 0; c < C; ++c) {
        const T* xp = x.plane(n, c);
        T* yp = y.plane(n, c);
        for (int oy = 0; oy < OH; ++oy) {
          for (int ox = 0; ox < OW; ++ox) {
            const int y0 = std::max(0, oy * 2 - 1), y1 = std::min(H - 1, oy * 2 + 1);
            const int x0 = std::max(0, ox * 2 - 1), x1 = std::min(W - 1, ox * 2 + 1);
            std::size_t best = static_cast<std::size_t>(y0) * W + x0;
            T bv = xp[best];
            for (int iy = y0; iy <= y1; ++iy) {
              for (int ix = x0; ix <= x1; ++ix) {
                const std::size_t at = static_cast<std::size_t>(iy) * W + ix;
                if (xp[at] > bv) {
                  bv = xp[at];
                  best = at;
                }
              }
            }
            yp[static_cast<std::size_t>(oy) * OW + ox] = bv;
            if (keep) argmax[out_at] = static_cast<std::uint32_t>(best);
            ++out_at;
          }
        }
      }
    }
    cached = keep;
    return y;
  }

  TensorT<T> backward(const TensorT<T>& d_out) {
    if (!cached) throw std::runtime_error("maxpool: backward without a cached train-mode forward");
    TensorT<T> dx(in_shape);
    const std::size_t N = dx.n(), C = dx.c();
    const std::size_t OHW = d_out.h() * d_out.w();
    std::size_t out_at = 0;
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t c = 0; c < C; ++c) {
        const T* dy = d_out.plane(n, c);
        T* dp = dx.plane(n, c);
        for (std::size_t k = 0; k < OHW; ++k) dp[argmax[out_at + k]] += dy[k];
        out_at += OHW;
      }
    }
    return dx;
  }
};

template <typename T>
struct SigmoidT {
  TensorT<T> y_cache;
  bool cached = false;

  TensorT<T> forward(const TensorT<T>& x, Mode mode) {
    TensorT<T> y(x.shape);
    for (std::size_t k = 0; k < x.size(); ++k) y.data[k] = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(x.data[k]))));
    if (mode == Mode::Train) {
      y_cache = y;
      cached = true;
    }
    return y;
  }

  TensorT<T> backward(const TensorT<T>& d_out) {
    if (!cached) throw std::runtime_error("sigmoid: backward without a cached train-mode forward");
    TensorT<T> dx(d_out.shape);
    for (std::size_t k = 0; k < d_out.size(); ++k) {
      const T s = y_cache.data[k];
      dx.data[k] = d_out.data[k] * s * (T(1) - s);
    }
    return dx;
  }
};

// Cross feature interaction, Eq. (5):
//   f_hv' = sigmoid(alpha) * f_hv + (1 - sigmoid(alpha)) * f_dg
//   f_dg' = sigmoid(beta)  * f_dg + (1 - sigmoid(beta))  * f_hv
template <typename T>
std::pair<TensorT<T>, TensorT<T>> cfim_fuse(const TensorT<T>& f_hv, const TensorT<T>& f_dg, double alpha, double beta) {
  if (!f_hv.same_shape(f_dg)) {
    throw std::invalid_argument("cfim: stream shapes differ, " + shape_to_string(f_hv.shape) + " vs " +
                                shape_to_string(f_dg.shape));
  }
  const T sa = static_cast<T>(1.0 / (1.0 + std::exp(-alpha)));
  const T sb = static_cast<T>(1.0 / (1.0 + std::exp(-beta)));
  TensorT<T> out_hv(f_hv.shape), out_dg(f_dg.shape);
  for (std::size_t k = 0; k < f_hv.size(); ++k) {
    out_hv.data[k] = sa * f_hv.data[k] + (T(1) - sa) * f_dg.data[k];
    out_dg.data[k] = sb * f_dg.data[k] + (T(1) - sb) * f_hv.data[k];
  }
  return {std::move(out_hv), std::move(out_dg)};
}

template <typename T>
struct CfimT {
  TensorT<T> alpha{{1}};
  TensorT<T> beta{{1}};
  TensorT<T> d_alpha{{1}};
  TensorT<T> d_beta{{1}};
  bool learnable = true;

  TensorT<T> a_cache, b_cache;
  bool cached = false;

  std::pair<TensorT<T>, TensorT<T>> forward(const TensorT<T>& f_hv, const TensorT<T>& f_dg, Mode mode) {
    auto out = cfim_fuse(f_hv, f_dg, static_cast<double>(alpha.data[0]), static_cast<double>(beta.data[0]));
    if (mode == Mode::Train) {
      a_cache = f_hv;
      b_cache = f_dg;
      cached = true;
    }
    return out;
  }

  std::pair<TensorT<T>, TensorT<T>> backward(const TensorT<T>& d_hv, const TensorT<T>& d_dg) {
    if (!cached) throw std::runtime_error("cfim: backward without a cached train-mode forward");
    const double a = alpha.data[0], b = beta.data[0];
    const T sa = static_cast<T>(1.0 / (1.0 + std::exp(-a)));
    const T sb = static_cast<T>(1.0 / (1.0 + std::exp(-b)));
    TensorT<T> dx_hv(d_hv.shape), dx_dg(d_dg.shape);
    double acc_a = 0, acc_b = 0;
    for (std::size_t k = 0; k < d_hv.size(); ++k) {
      dx_hv.data[k] = sa * d_hv.data[k] + (T(1) - sb) * d_dg.data[k];
      dx_dg.data[k] = (T(1) - sa) * d_hv.data[k] + sb * d_dg.data[k];
      acc_a += static_cast<double>(d_hv.data[k]) * (a_cache.data[k] - b_cache.data[k]);
      acc_b += static_cast<double>(d_dg.data[k]) * (b_cache.data[k] - a_cache.data[k]);
    }
    d_alpha.data[0] += static_cast<T>(static_cast<double>(sa) * (1.0 - sa) * acc_a);
    d_beta.data[0] += static_cast<T>(static_cast<double>(sb) * (1.0 - sb) * acc_b);
    return {std::move(dx_hv), std::move(dx_dg)};
  }
};

template <typename T>
TensorT<T> concat_channels(const std::vector<const TensorT<T>*>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no tensors");
  const std::size_t N = parts[0]->n(), H = parts[0]->h(), W = parts[0]->w();
  std::size_t C = 0;
  for (const auto* p : parts) {
    if (p->ndim() != 4 || p->n() != N || p->h() != H || p->w() != W) {
      throw std::invalid_argument("concat: incompatible shape " + shape_to_string(p->shape));
    }
    C += p->c();
  }
  TensorT<T> out({N, C, H, W});
  for (std::size_t n = 0; n < N; ++n) {
    std::size_t co = 0;
    for (const auto* p : parts) {
      for (std::size_t c = 0; c < p->c(); ++c, ++co) {
        const T* src = p->plane(n, c);
        T* dst = out.plane(n, co);
        for (std::size_t k = 0; k < H * W; ++k) dst[k] = src[k];
      }
    }
  }
  return out;
}

template <typename T>
std::vector<TensorT<T>> split_channels(const TensorT<T>& x, const std::vector<std::size_t>& widths) {
  std::size_t total = 0;
  for (std::size_t w : widths) total += w;
  if (x.ndim() != 4 || x.c() != total) {
    throw std::invalid_argument("split: tensor " + shape_to_string(x.shape) + " cannot split into the given widths");
  }
  std::vector<TensorT<T>> parts;
  const std::size_t N = x.n(), H = x.h(), W = x.w();
  std::size_t c0 = 0;
  for (std::size_t w : widths) {
    TensorT<T> part({N, w, H, W});
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t c = 0; c < w; ++c) {
        const T* src = x.plane(n, c0 + c);
        T* dst = part.plane(n, c);
        for (std::size_t k = 0; k < H * W; ++k) dst[k] = src[k];
      }
    }
    c0 += w;
    parts.push_back(std::move(part));
  }
  return parts;
}

// conv -> batch norm -> relu, the Table-1 building brick.
template <typename T>
struct ConvBnReluT {
  ConvLayerT<T> conv;
  BatchNormT<T> bn;
  std::vector<std::uint8_t> relu_mask;
  bool mask_cached = false;

  ConvBnReluT() : bn(1) {}
  ConvBnReluT(const SamplingPattern& pat, std::size_t cout, std::size_t cin, T theta)
      : conv(make_conv_layer<T>(pat, cout, cin, theta)), bn(cout) {}

  TensorT<T> forward(const TensorT<T>& x, Mode mode) {
    TensorT<T> y = conv_forward_direct(conv, x);
    if (mode == Mode::Train) {
      conv.in_cache = x;
      conv.cached = true;
    }
    y = bn.forward(y, mode);
    const bool keep = mode == Mode::Train;
    if (keep) relu_mask.assign(y.size(), 0);
    for (std::size_t k = 0; k < y.size(); ++k) {
      if (y.data[k] > T(0)) {
        if (keep) relu_mask[k] = 1;
      } else {
        y.data[k] = T(0);
      }
    }
    mask_cached = keep;
    return y;
  }

  TensorT<T> backward(const TensorT<T>& d_out) {
    if (!mask_cached || !conv.cached) throw std::runtime_error("conv block: backward without a cached forward");
    TensorT<T> d(d_out.shape);
    for (std::size_t k = 0; k < d_out.size(); ++k) d.data[k] = relu_mask[k] ? d_out.data[k] : T(0);
    d = bn.backward(d);
    ConvGradients<T> g = conv_backward(conv, conv.in_cache, d);
    for (std::size_t k = 0; k < conv.d_weights.size(); ++k) conv.d_weights.data[k] += g.d_weights.data[k];
    return std::move(g.d_input);
  }
};

// One Table-1 block: the max-pool that leaves the previous resolution, then
// three conv-BN-relu layers at the block's own resolution.
template <typename T>
struct BlockT {
  MaxPoolT<T> pool;
  std::array<ConvBnReluT<T>, 3> convs;

  TensorT<T> forward(const TensorT<T>& x, Mode mode) {
    TensorT<T> y = pool.forward(x, mode);
    for (auto& c : convs) y = c.forward(y, mode);
    return y;
  }

  TensorT<T> backward(const TensorT<T>& d_out) {
    TensorT<T> d = d_out;
    for (int i = 2; i >= 0; --i) d = convs[static_cast<std::size_t>(i)].backward(d);
    return pool.backward(d);
  }
};

// Stem plus three blocks; produces the low/mid/high taps.
template <typename T>
struct StreamNetT {
  ConvBnReluT<T> stem;
  std::array<BlockT<T>, 3> blocks;

  std::array<TensorT<T>, 3> forward(const TensorT<T>& x, Mode mode) {
    std::array<TensorT<T>, 3> taps;
    TensorT<T> y = stem.forward(x, mode);
    for (std::size_t b = 0; b < 3; ++b) {
      y = blocks[b].forward(y, mode);
      taps[b] = y;
    }
    return taps;
  }

  TensorT<T> backward(const std::array<TensorT<T>, 3>& d_taps) {
    TensorT<T> d = blocks[2].backward(d_taps[2]);
    for (std::size_t k = 0; k < d.size(); ++k) d.data[k] += d_taps[1].data[k];
    d = blocks[1].backward(d);
    for (std::size_t k = 0; k < d.size(); ++k) d.data[k] += d_taps[0].data[k];
    d = blocks[0].backward(d);
    return stem.backward(d);
  }
};

// Head: two conv-BN-relu layers then a bare conv producing the depth logits
// (the sigmoid that maps logits into [0,1] lives in the network so the
// pre-activation map stays observable).
template <typename T>
struct HeadT {
  std::array<ConvBnReluT<T>, 2> convs;
  ConvLayerT<T> out;

  TensorT<T> forward(const TensorT<T>& x, Mode mode) {
    TensorT<T> y = convs[0].forward(x, mode);
    y = convs[1].forward(y, mode);
    TensorT<T> logits = conv_forward_direct(out, y);
    if (mode == Mode::Train) {
      out.in_cache = std::move(y);
      out.cached = true;
    }
    return logits;
  }

  TensorT<T> backward(const TensorT<T>& d_logits) {
    if (!out.cached) throw std::runtime_error("head: backward without a cached forward");
    ConvGradients<T> g = conv_backward(out, out.in_cache, d_logits);
    for (std::size_t k = 0; k < out.d_weights.size(); ++k) out.d_weights.data[k] += g.d_weights.data[k];
    TensorT<T> d = convs[1].backward(g.d_input);
    return convs[0].backward(d);
  }
};

template <typename T>
struct ForwardOutT {
  TensorT<T> depth;   // N x 1 x S/8 x S/8, in (0,1)
  TensorT<T> logits;  // pre-sigmoid map of the (primary) head
  TensorT<T> logits_b;  // second head's logits under dual average fusion
  std::array<TensorT<T>, 3> taps_a;  // low/mid/high block outputs, pre-CFIM
  std::array<TensorT<T>, 3> taps_b;
};

template <typename T>
struct NetworkT {
  NetworkSpec spec;
  StreamNetT<T> stream_a, stream_b;
  std::array<CfimT<T>, 3> cfims;
  HeadT<T> head_a, head_b;
  SigmoidT<T> sig_a, sig_b;

  explicit NetworkT(const NetworkSpec& s) : spec(s) {
    const SamplingPattern pat_a = pattern(spec.op_a.pattern);
    build_stream(stream_a, pat_a, static_cast<T>(spec.op_a.theta));
    const std::size_t tap_c = 3 * static_cast<std::size_t>(spec.block_widths[2]);
    if (!spec.dual_stream) {
      build_head(head_a, pat_a, static_cast<T>(spec.op_a.theta), tap_c);
    } else {
      const SamplingPattern pat_b = pattern(spec.op_b.pattern);
      build_stream(stream_b, pat_b, static_cast<T>(spec.op_b.theta));
      if (spec.fusion == Fusion::Average) {
        build_head(head_a, pat_a, static_cast<T>(spec.op_a.theta), tap_c);
        build_head(head_b, pat_b, static_cast<T>(spec.op_b.theta), tap_c);
      } else {
        build_head(head_a, pat_a, static_cast<T>(spec.op_a.theta), 2 * tap_c);
      }
      for (std::size_t k = 0; k < 3; ++k) {
        cfims[k].alpha.data[0] = static_cast<T>(spec.cfim_init[k]);
        cfims[k].beta.data[0] = static_cast<T>(spec.cfim_init[3 + k]);
        cfims[k].learnable = spec.cfim_learnable;
      }
    }
  }

  void build_stream(StreamNetT<T>& s, const SamplingPattern& pat, T theta) {
    s.stem = ConvBnReluT<T>(pat, static_cast<std::size_t>(spec.stem_width),
                            static_cast<std::size_t>(spec.in_channels), theta);
    std::size_t cin = static_cast<std::size_t>(spec.stem_width);
    for (auto& block : s.blocks) {
      for (std::size_t i = 0; i < 3; ++i) {
        const std::size_t cout = static_cast<std::size_t>(spec.block_widths[i]);
        block.convs[i] = ConvBnReluT<T>(pat, cout, cin, theta);
        cin = cout;
      }
    }
  }

  void build_head(HeadT<T>& h, const SamplingPattern& pat, T theta, std::size_t cin) {
    h.convs[0] = ConvBnReluT<T>(pat, static_cast<std::size_t>(spec.head_widths[0]), cin, theta);
    h.convs[1] = ConvBnReluT<T>(pat, static_cast<std::size_t>(spec.head_widths[1]),
                                static_cast<std::size_t>(spec.head_widths[0]), theta);
    h.out = make_conv_layer<T>(pat, 1, static_cast<std::size_t>(spec.head_widths[1]), theta);
  }

  void init_weights(Rng& rng) {
    auto init_stream = [&](StreamNetT<T>& s) {
      kaiming_init(s.stem.conv, rng);
      for (auto& b : s.blocks)
        for (auto& c : b.convs) kaiming_init(c.conv, rng);
    };
    auto init_head = [&](HeadT<T>& h) {
      kaiming_init(h.convs[0].conv, rng);
      kaiming_init(h.convs[1].conv, rng);
      kaiming_init(h.out, rng);
    };
    init_stream(stream_a);
    if (spec.dual_stream) init_stream(stream_b);
    init_head(head_a);
    if (spec.dual_stream && spec.fusion == Fusion::Average) init_head(head_b);
  }

  // Block-mean every tap down to the label resolution and concatenate.
  TensorT<T> gather_features(const std::array<TensorT<T>, 3>& taps) const {
    const std::size_t lab = static_cast<std::size_t>(spec.label_size());
    std::array<TensorT<T>, 3> small;
    for (std::size_t k = 0; k < 3; ++k) small[k] = resize_to(taps[k], lab, lab);
    return concat_channels<T>({&small[0], &small[1], &small[2]});
  }

  ForwardOutT<T> forward(const TensorT<T>& x, Mode mode) {
    const std::size_t S = static_cast<std::size_t>(spec.input_size);
    if (x.ndim() != 4 || x.c() != static_cast<std::size_t>(spec.in_channels) || x.h() != S || x.w() != S) {
      throw std::invalid_argument("network: expected input N x " + std::to_string(spec.in_channels) + " x " +
                                  std::to_string(S) + " x " + std::to_string(S) + ", got " + shape_to_string(x.shape));
    }
    ForwardOutT<T> out;
    out.taps_a = stream_a.forward(x, mode);
    if (!spec.dual_stream) {
      out.logits = head_a.forward(gather_features(out.taps_a), mode);
      out.depth = sig_a.forward(out.logits, mode);
      return out;
    }
    out.taps_b = stream_b.forward(x, mode);
    std::array<TensorT<T>, 3> enh_a = out.taps_a, enh_b = out.taps_b;
    if (spec.cfim_enabled) {
      for (std::size_t k = 0; k < 3; ++k) {
        auto pair = cfims[k].forward(out.taps_a[k], out.taps_b[k], mode);
        enh_a[k] = std::move(pair.first);
        enh_b[k] = std::move(pair.second);
      }
    }
    TensorT<T> feat_a = gather_features(enh_a);
    TensorT<T> feat_b = gather_features(enh_b);
    if (spec.fusion == Fusion::Average) {
      out.logits = head_a.forward(feat_a, mode);
      out.logits_b = head_b.forward(feat_b, mode);
      TensorT<T> da = sig_a.forward(out.logits, mode);
      TensorT<T> db = sig_b.forward(out.logits_b, mode);
      out.depth = TensorT<T>(da.shape);
      for (std::size_t k = 0; k < da.size(); ++k) out.depth.data[k] = static_cast<T>(0.5) * (da.data[k] + db.data[k]);
    } else {
      TensorT<T> feat = concat_channels<T>({&feat_a, &feat_b});
      out.logits = head_a.forward(feat, mode);
      out.depth = sig_a.forward(out.logits, mode);
    }
    return out;
  }

  // d_depth: gradient of the loss w.r.t. the predicted depth map.
  void backward(const TensorT<T>& d_depth) {
    const std::size_t lab = static_cast<std::size_t>(spec.label_size());
    const std::size_t bw = static_cast<std::size_t>(spec.block_widths[2]);
    const std::vector<std::size_t> tap_widths = {bw, bw, bw};
    const std::size_t s1 = static_cast<std::size_t>(spec.input_size) / 2;

    auto tap_extent = [&](std::size_t k) { return k == 0 ? s1 : (k == 1 ? s1 / 2 : s1 / 4); };
    auto spread = [&](std::vector<TensorT<T>>& chunks) {
      std::array<TensorT<T>, 3> d_taps;
      for (std::size_t k = 0; k < 3; ++k) d_taps[k] = resize_backward(chunks[k], tap_extent(k), tap_extent(k));
      return d_taps;
    };

    if (!spec.dual_stream) {
      TensorT<T> d_logits = sig_a.backward(d_depth);
      TensorT<T> d_feat = head_a.backward(d_logits);
      std::vector<TensorT<T>> chunks = split_channels(d_feat, tap_widths);
      std::array<TensorT<T>, 3> d_taps = spread(chunks);
      stream_a.backward(d_taps);
      return;
    }

    std::array<TensorT<T>, 3> d_enh_a, d_enh_b;
    if (spec.fusion == Fusion::Average) {
      TensorT<T> d_half(d_depth.shape);
      for (std::size_t k = 0; k < d_depth.size(); ++k) d_half.data[k] = static_cast<T>(0.5) * d_depth.data[k];
      TensorT<T> d_feat_a = head_a.backward(sig_a.backward(d_half));
      TensorT<T> d_feat_b = head_b.backward(sig_b.backward(d_half));
      std::vector<TensorT<T>> ca = split_channels(d_feat_a, tap_widths);
      std::vector<TensorT<T>> cb = split_channels(d_feat_b, tap_widths);
      d_enh_a = spread(ca);
      d_enh_b = spread(cb);
    } else {
      TensorT<T> d_logits = sig_a.backward(d_depth);
      TensorT<T> d_feat = head_a.backward(d_logits);
      std::vector<TensorT<T>> chunks = split_channels(d_feat, {bw, bw, bw, bw, bw, bw});
      std::vector<TensorT<T>> ca(chunks.begin(), chunks.begin() + 3);
      std::vector<TensorT<T>> cb(chunks.begin() + 3, chunks.end());
      d_enh_a = spread(ca);
      d_enh_b = spread(cb);
    }

    std::array<TensorT<T>, 3> d_taps_a, d_taps_b;
    if (spec.cfim_enabled) {
      for (std::size_t k = 0; k < 3; ++k) {
        auto pair = cfims[k].backward(d_enh_a[k], d_enh_b[k]);
        d_taps_a[k] = std::move(pair.first);
        d_taps_b[k] = std::move(pair.second);
      }
    } else {
      d_taps_a = std::move(d_enh_a);
      d_taps_b = std::move(d_enh_b);
    }
    stream_a.backward(d_taps_a);
    stream_b.backward(d_taps_b);
  }

  std::vector<ParamRef<T>> parameters() {
    std::vector<ParamRef<T>> refs;
    auto add = [&](const std::string& name, TensorT<T>& value, TensorT<T>& grad) {
      refs.push_back(ParamRef<T>{name, &value, &grad});
    };
    auto add_cbr = [&](const std::string& name, ConvBnReluT<T>& c) {
      add(name + ".w", c.conv.weights, c.conv.d_weights);
      add(name + ".bn.gamma", c.bn.gamma, c.bn.d_gamma);
      add(name + ".bn.beta", c.bn.beta, c.bn.d_beta);
    };
    auto add_stream = [&](const std::string& name, StreamNetT<T>& s) {
      add_cbr(name + ".stem", s.stem);
      for (std::size_t b = 0; b < 3; ++b)
        for (std::size_t i = 0; i < 3; ++i)
          add_cbr(name + ".block" + std::to_string(b) + ".conv" + std::to_string(i), s.blocks[b].convs[i]);
    };
    auto add_head = [&](const std::string& name, HeadT<T>& h) {
      add_cbr(name + ".conv0", h.convs[0]);
      add_cbr(name + ".conv1", h.convs[1]);
      add(name + ".out.w", h.out.weights, h.out.d_weights);
    };
    add_stream("a", stream_a);
    if (spec.dual_stream) add_stream("b", stream_b);
    if (spec.dual_stream && spec.cfim_enabled && spec.cfim_learnable) {
      const char* level[3] = {"low", "mid", "high"};
      for (std::size_t k = 0; k < 3; ++k) {
        add(std::string("cfim.") + level[k] + ".alpha", cfims[k].alpha, cfims[k].d_alpha);
        add(std::string("cfim.") + level[k] + ".beta", cfims[k].beta, cfims[k].d_beta);
      }
    }
    add_head("head_a", head_a);
    if (spec.dual_stream && spec.fusion == Fusion::Average) add_head("head_b", head_b);
    return refs;
  }

  // Everything a checkpoint must carry: trainable parameters plus batch-norm
  // running statistics plus CFIM scalars even when fixed.
  std::vector<std::pair<std::string, TensorT<T>*>> state_tensors() {
    std::vector<std::pair<std::string, TensorT<T>*>> out;
    auto add_cbr = [&](const std::string& name, ConvBnReluT<T>& c) {
      out.emplace_back(name + ".w", &c.conv.weights);
      out.emplace_back(name + ".bn.gamma", &c.bn.gamma);
      out.emplace_back(name + ".bn.beta", &c.bn.beta);
      out.emplace_back(name + ".bn.running_mean", &c.bn.running_mean);
      out.emplace_back(name + ".bn.running_var", &c.bn.running_var);
    };
    auto add_stream = [&](const std::string& name, StreamNetT<T>& s) {
      add_cbr(name + ".stem", s.stem);
      for (std::size_t b = 0; b < 3; ++b)
        for (std::size_t i = 0; i < 3; ++i)
          add_cbr(name + ".block" + std::to_string(b) + ".conv" + std::to_string(i), s.blocks[b].convs[i]);
    };
    auto add_head = [&](const std::string& name, HeadT<T>& h) {
      add_cbr(name + ".conv0", h.convs[0]);
      add_cbr(name + ".conv1", h.convs[1]);
      out.emplace_back(name + ".out.w", &h.out.weights);
    };
    add_stream("a", stream_a);
    if (spec.dual_stream) add_stream("b", stream_b);
    if (spec.dual_stream && spec.cfim_enabled) {
      const char* level[3] = {"low", "mid", "high"};
      for (std::size_t k = 0; k < 3; ++k) {
        out.emplace_back(std::string("cfim.") + level[k] + ".alpha", &cfims[k].alpha);
        out.emplace_back(std::string("cfim.") + level[k] + ".beta", &cfims[k].beta);
      }
    }
    add_head("head_a", head_a);
    if (spec.dual_stream && spec.fusion == Fusion::Average) add_head("head_b", head_b);
    return out;
  }

  void zero_grad() {
    auto zero_cbr = [](ConvBnReluT<T>& c) {
      c.conv.d_weights.fill(T(0));
      c.bn.d_gamma.fill(T(0));
      c.bn.d_beta.fill(T(0));
    };
    auto zero_stream = [&](StreamNetT<T>& s) {
      zero_cbr(s.stem);
      for (auto& b : s.blocks)
        for (auto& c : b.convs) zero_cbr(c);
    };
    auto zero_head = [&](HeadT<T>& h) {
      zero_cbr(h.convs[0]);
      zero_cbr(h.convs[1]);
      h.out.d_weights.fill(T(0));
    };
    zero_stream(stream_a);
    if (spec.dual_stream) zero_stream(stream_b);
    for (auto& c : cfims) {
      c.d_alpha.fill(T(0));
      c.d_beta.fill(T(0));
    }
    zero_head(head_a);
    if (spec.dual_stream && spec.fusion == Fusion::Average) zero_head(head_b);
  }
};

using Network = NetworkT<float>;

}  // namespace ccdc
