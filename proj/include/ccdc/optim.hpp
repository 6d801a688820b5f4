#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "ccdc/tensor.hpp"

namespace ccdc {

// A named view onto one trainable tensor and its gradient accumulator.
// Parameter order must be stable across calls; the optimizer state is
// positional.
template <typename T>
struct ParamRef {
  std::string name;
  TensorT<T>* value = nullptr;
  TensorT<T>* grad = nullptr;
};

template <typename T>
struct AdamT {
  double lr = 1e-4;
  double weight_decay = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long long step_count = 0;
  std::vector<std::vector<double>> m;  // first moments, one vector per parameter
  std::vector<std::vector<double>> v;  // second moments
};

// Standard Adam with the L2 term weight_decay * param added to the gradient.
template <typename T>
void adam_step(AdamT<T>& state, std::vector<ParamRef<T>>& params) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t p = 0; p < params.size(); ++p) {
      state.m[p].assign(params[p].value->size(), 0.0);
      state.v[p].assign(params[p].value->size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) {
    throw std::runtime_error("adam_step: optimizer holds state for " + std::to_string(state.m.size()) +
                             " parameters, got " + std::to_string(params.size()));
  }
  ++state.step_count;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t p = 0; p < params.size(); ++p) {
    TensorT<T>& value = *params[p].value;
    const TensorT<T>& grad = *params[p].grad;
    if (state.m[p].size() != value.size() || grad.size() != value.size()) {
      throw std::runtime_error("adam_step: size mismatch for parameter '" + params[p].name + "'");
    }
    std::vector<double>& mp = state.m[p];
    std::vector<double>& vp = state.v[p];
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double g = static_cast<double>(grad.data[k]) + state.weight_decay * static_cast<double>(value.data[k]);
      mp[k] = state.beta1 * mp[k] + (1.0 - state.beta1) * g;
      vp[k] = state.beta2 * vp[k] + (1.0 - state.beta2) * g * g;
      const double mhat = mp[k] / bc1;
      const double vhat = vp[k] / bc2;
      value.data[k] -= static_cast<T>(state.lr * mhat / (std::sqrt(vhat) + state.epsilon));
    }
  }
}

// Constant base_lr until halve_at, half of it from halve_at onward
// (epochs are 0-indexed; halve_at beyond max_epochs means a flat schedule).
inline double lr_schedule(int epoch, double base_lr, int max_epochs, int halve_at) {
  if (epoch < 0 || max_epochs <= 0 || epoch >= max_epochs) {
    throw std::invalid_argument("lr_schedule: epoch " + std::to_string(epoch) + " outside [0," +
                                std::to_string(max_epochs) + ")");
  }
  return epoch < halve_at ? base_lr : base_lr / 2.0;
}

}  // namespace ccdc
