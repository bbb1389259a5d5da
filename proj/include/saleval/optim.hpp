#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "saleval/error.hpp"
#include "saleval/network.hpp"

namespace saleval {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update of a flat parameter block. `step` is the
/// 1-based index of this update.
template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, std::span<T> m, std::span<T> v, std::size_t step,
               const AdamConfig& cfg) {
  require(params.size() == grads.size() && params.size() == m.size() && params.size() == v.size(),
          ErrorKind::ShapeMismatch, "adam_step: parameter/gradient/moment sizes differ");
  require(cfg.lr > 0 && step >= 1, ErrorKind::InvalidArgument, "adam_step: lr must be > 0 and step >= 1");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    params[i] = static_cast<T>(params[i] - cfg.lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.eps));
  }
}

template <typename T>
struct AdamState {
  std::size_t step = 0;
  std::vector<LayerGrad<T>> m;
  std::vector<LayerGrad<T>> v;

  explicit AdamState(const Network<T>& net) {
    for (const auto& l : net.layers()) {
      m.push_back({AlignedVector<T>(l.weight.size()), AlignedVector<T>(l.bias.size())});
      v.push_back({AlignedVector<T>(l.weight.size()), AlignedVector<T>(l.bias.size())});
    }
  }
};

template <typename T>
void adam_step(Network<T>& net, const Gradients<T>& grads, AdamState<T>& state, const AdamConfig& cfg) {
  ++state.step;
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    auto& layer = net.layers()[l];
    if (!layer.spec.has_params()) continue;
    const auto& g = grads.layers[l];
    adam_step<T>(layer.weight, g.weight, state.m[l].weight, state.v[l].weight, state.step, cfg);
    adam_step<T>(layer.bias, g.bias, state.m[l].bias, state.v[l].bias, state.step, cfg);
  }
}

}  // namespace saleval
