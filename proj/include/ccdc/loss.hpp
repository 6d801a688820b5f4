#pragma once

#include <algorithm>
#include <array>
#include <stdexcept>
#include <utility>

#include "ccdc/tensor.hpp"

namespace ccdc {

struct LossValue {
  double mse = 0;
  double cdl = 0;
  double total = 0;
};

// The eight directional contrast kernels: +1 at the center, -1 at one
// neighbor. Contrasts are taken on valid positions only (both ends inside),
// so a constant offset contributes nothing.
inline const std::array<std::pair<int, int>, 8>& contrast_directions() {
  static const std::array<std::pair<int, int>, 8> dirs = {
      {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1}}};
  return dirs;
}

namespace detail {

template <typename T>
void check_loss_shapes(const TensorT<T>& pred, const TensorT<T>& label) {
  if (pred.ndim() != 4 || label.ndim() != 4 || !pred.same_shape(label)) {
    throw std::invalid_argument("loss: prediction " + shape_to_string(pred.shape) + " and label " +
                                shape_to_string(label.shape) + " must be matching NCHW tensors");
  }
}

}  // namespace detail

// Mean squared error plus cdl_weight times the contrast depth loss. CDL is
// the per-direction mean squared contrast error averaged over the eight
// directions.
template <typename T>
LossValue depth_loss(const TensorT<T>& pred, const TensorT<T>& label, double cdl_weight) {
  detail::check_loss_shapes(pred, label);
  const std::size_t planes = pred.n() * pred.c();
  const int H = static_cast<int>(pred.h()), W = static_cast<int>(pred.w());

  LossValue out;
  double se = 0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double d = static_cast<double>(pred.data[k]) - static_cast<double>(label.data[k]);
    se += d * d;
  }
  out.mse = se / static_cast<double>(pred.size());

  double cdl = 0;
  for (const auto& [dy, dx] : contrast_directions()) {
    const int y0 = std::max(0, -dy), y1 = H - std::max(0, dy);
    const int x0 = std::max(0, -dx), x1 = W - std::max(0, dx);
    double dir_se = 0;
    for (std::size_t pl = 0; pl < planes; ++pl) {
      const T* pp = pred.data.data() + pl * static_cast<std::size_t>(H) * W;
      const T* lp = label.data.data() + pl * static_cast<std::size_t>(H) * W;
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          const std::size_t at = static_cast<std::size_t>(y) * W + x;
          const std::size_t nb = static_cast<std::size_t>(y + dy) * W + (x + dx);
          const double cp = static_cast<double>(pp[at]) - static_cast<double>(pp[nb]);
          const double cl = static_cast<double>(lp[at]) - static_cast<double>(lp[nb]);
          const double e = cp - cl;
          dir_se += e * e;
        }
      }
    }
    const double count = static_cast<double>(planes) * (y1 - y0) * (x1 - x0);
    if (count > 0) cdl += dir_se / count;
  }
  out.cdl = cdl / 8.0;
  out.total = out.mse + cdl_weight * out.cdl;
  return out;
}

// Gradient of depth_loss().total with respect to the prediction.
template <typename T>
TensorT<T> depth_loss_backward(const TensorT<T>& pred, const TensorT<T>& label, double cdl_weight) {
  detail::check_loss_shapes(pred, label);
  const std::size_t planes = pred.n() * pred.c();
  const int H = static_cast<int>(pred.h()), W = static_cast<int>(pred.w());

  TensorT<T> grad(pred.shape);
  const double inv_n = 2.0 / static_cast<double>(pred.size());
  for (std::size_t k = 0; k < pred.size(); ++k) {
    grad.data[k] = static_cast<T>(inv_n * (static_cast<double>(pred.data[k]) - static_cast<double>(label.data[k])));
  }

  for (const auto& [dy, dx] : contrast_directions()) {
    const int y0 = std::max(0, -dy), y1 = H - std::max(0, dy);
    const int x0 = std::max(0, -dx), x1 = W - std::max(0, dx);
    const double count = static_cast<double>(planes) * (y1 - y0) * (x1 - x0);
    if (count <= 0) continue;
    const double scale = cdl_weight * 2.0 / (8.0 * count);
    for (std::size_t pl = 0; pl < planes; ++pl) {
      const T* pp = pred.data.data() + pl * static_cast<std::size_t>(H) * W;
      const T* lp = label.data.data() + pl * static_cast<std::size_t>(H) * W;
      T* gp = grad.data.data() + pl * static_cast<std::size_t>(H) * W;
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          const std::size_t at = static_cast<std::size_t>(y) * W + x;
          const std::size_t nb = static_cast<std::size_t>(y + dy) * W + (x + dx);
          const double cp = static_cast<double>(pp[at]) - static_cast<double>(pp[nb]);
          const double cl = static_cast<double>(lp[at]) - static_cast<double>(lp[nb]);
          const double e = scale * (cp - cl);
          gp[at] += static_cast<T>(e);
          gp[nb] -= static_cast<T>(e);
        }
      }
    }
  }
  return grad;
}

}  // namespace ccdc
