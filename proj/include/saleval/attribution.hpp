#pragma once

// Gradient-based saliency maps for a classifier whose last layer emits logits.
// All functions work on a batch x = [N, input_shape...] with one target class
// per row and return maps of the same shape as x.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "saleval/error.hpp"
#include "saleval/network.hpp"
#include "saleval/rng.hpp"

namespace saleval {

template <typename T>
std::vector<int> predicted_classes(const Network<T>& net, const Tensor<T>& x) {
  const auto logits = predict(net, x);
  const std::size_t n = logits.dim(0);
  std::vector<int> out(n);
  for (std::size_t b = 0; b < n; ++b) {
    const auto row = logits.row(b);
    out[b] = int(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

namespace detail {

template <typename T>
Tensor<T> one_hot_upstream(const Shape& out_shape, std::span<const int> targets) {
  require(out_shape.size() == 2 && out_shape[0] == targets.size(), ErrorKind::ShapeMismatch,
          "expected logits [N, C] with N targets, got " + shape_str(out_shape));
  Tensor<T> up(out_shape);
  for (std::size_t b = 0; b < targets.size(); ++b) {
    require(targets[b] >= 0 && std::size_t(targets[b]) < out_shape[1], ErrorKind::InvalidArgument,
            "target class " + std::to_string(targets[b]) + " out of range");
    up[b * out_shape[1] + std::size_t(targets[b])] = T{1};
  }
  return up;
}

}  // namespace detail

/// d logit_target / d x, with standard or guided ReLU backward.
template <typename T>
Tensor<T> logit_gradients(const Network<T>& net, const Tensor<T>& x, std::span<const int> targets,
                          ReluRule rule = ReluRule::standard) {
  auto fr = forward(net, x, true);
  const auto up = detail::one_hot_upstream<T>(fr.output.shape(), targets);
  return backward(*fr.tape, up, BackwardOptions{rule, false}).input_grad;
}

template <typename T>
Tensor<T> vanilla_gradients(const Network<T>& net, const Tensor<T>& x, std::span<const int> targets) {
  return logit_gradients(net, x, targets);
}

template <typename T>
Tensor<T> guided_backprop(const Network<T>& net, const Tensor<T>& x, std::span<const int> targets) {
  return logit_gradients(net, x, targets, ReluRule::guided);
}

template <typename T>
Tensor<T> input_x_gradients(const Network<T>& net, const Tensor<T>& x, std::span<const int> targets) {
  auto g = logit_gradients(net, x, targets);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= x[i];
  return g;
}

/// (x - baseline) ⊙ mean of gradients at the `steps` midpoints of the straight
/// path from baseline to x. A null baseline means all zeros.
template <typename T>
Tensor<T> integrated_gradients(const Network<T>& net, const Tensor<T>& x, std::span<const int> targets,
                               std::size_t steps, const Tensor<T>* baseline = nullptr) {
  require(steps >= 1, ErrorKind::InvalidArgument, "integrated gradients needs at least one step");
  Tensor<T> base = baseline ? *baseline : Tensor<T>(x.shape());
  require_same_shape(base, x, "integrated_gradients baseline");
  std::vector<double> total(x.size(), 0.0);
  Tensor<T> point(x.shape());
  for (std::size_t k = 0; k < steps; ++k) {
    const double alpha = (double(k) + 0.5) / double(steps);
    for (std::size_t i = 0; i < x.size(); ++i) point[i] = T(double(base[i]) + alpha * (double(x[i]) - double(base[i])));
    const auto g = logit_gradients(net, point, targets);
    for (std::size_t i = 0; i < x.size(); ++i) total[i] += double(g[i]);
  }
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = T((double(x[i]) - double(base[i])) * total[i] / double(steps));
  return out;
}

/// Layer-wise relevance propagation with the epsilon rule, starting from the
/// target logit. Max-pooling routes relevance to the winning input.
template <typename T>
Tensor<T> lrp_epsilon(const Network<T>& net, const Tensor<T>& x, std::span<const int> targets, double epsilon) {
  require(epsilon > 0.0, ErrorKind::InvalidArgument, "epsilon must be positive");
  for (const auto& L : net.layers())
    require(L.spec.kind != LayerKind::sigmoid && L.spec.kind != LayerKind::upsample2d, ErrorKind::UnsupportedLayer,
            "LRP-epsilon has no rule for " + std::string(to_string(L.spec.kind)));
  auto fr = forward(net, x, true);
  auto& records = fr.tape->records();
  Tensor<T> relevance = detail::one_hot_upstream<T>(fr.output.shape(), targets);
  for (std::size_t i = 0; i < relevance.size(); ++i) relevance[i] *= fr.output[i];

  for (std::size_t li = net.layers().size(); li-- > 0;) {
    const auto& L = net.layers()[li];
    const Tensor<T>& a = records[li].input;
    switch (L.spec.kind) {
      case LayerKind::relu:
      case LayerKind::flatten:
      case LayerKind::reshape:
        relevance = std::move(relevance).reshaped(a.shape());
        break;
      case LayerKind::maxpool2d: {
        Tensor<T> r(a.shape());
        for (std::size_t o = 0; o < relevance.size(); ++o) r[records[li].argmax[o]] += relevance[o];
        relevance = std::move(r);
        break;
      }
      case LayerKind::dense:
      case LayerKind::conv2d: {
        const auto single = net.slice(li, li + 1);
        auto local = forward(single, a, true);
        Tensor<T> s(local.output.shape());
        for (std::size_t k = 0; k < s.size(); ++k) {
          const double z = double(local.output[k]);
          s[k] = T(double(relevance[k]) / (z + epsilon * (z >= 0.0 ? 1.0 : -1.0)));
        }
        auto c = backward(*local.tape, s, BackwardOptions{ReluRule::standard, false}).input_grad;
        for (std::size_t j = 0; j < c.size(); ++j) c[j] *= a[j];
        relevance = std::move(c);
        break;
      }
      default:
        fail(ErrorKind::UnsupportedLayer, std::string(to_string(L.spec.kind)));
    }
  }
  return relevance;
}

/// Mean of `base` over `n` Gaussian-noised copies of each image, with
/// sigma = sigma_rel * (max - min) of that image. Noise is seeded per image id,
/// so results do not depend on batch composition. sigma_rel == 0 returns the
/// base maps unchanged.
template <typename T, typename Base>
Tensor<T> smoothgrad(Base&& base, const Tensor<T>& x, std::span<const int> targets,
                     std::span<const std::uint32_t> ids, std::size_t n, double sigma_rel, std::uint64_t seed) {
  require(n >= 1, ErrorKind::InvalidArgument, "smoothgrad needs at least one sample");
  require(sigma_rel >= 0.0, ErrorKind::InvalidArgument, "sigma must be non-negative");
  if (sigma_rel == 0.0) return base(x, targets);
  const std::size_t batch = x.dim(0), per = x.stride0();
  require(ids.size() == batch, ErrorKind::ShapeMismatch, "one id per image required");
  std::vector<double> sigma(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto row = x.row(b);
    const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
    sigma[b] = sigma_rel * (double(*hi) - double(*lo));
  }
  std::vector<double> total(x.size(), 0.0);
  Tensor<T> noisy(x.shape());
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t b = 0; b < batch; ++b) {
      auto eng = make_engine({seed, 0x5a007ULL, ids[b], j});
      for (std::size_t p = 0; p < per; ++p)
        noisy[b * per + p] = T(double(x[b * per + p]) + sigma[b] * gaussian(eng));
    }
    const Tensor<T> maps = base(noisy, targets);
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += double(maps[i]);
  }
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < total.size(); ++i) out[i] = T(total[i] / double(n));
  return out;
}

/// I.i.d. uniform [0,1) values, seeded by (seed, id).
template <typename T>
std::vector<T> random_map(std::size_t size, std::uint64_t seed, std::uint32_t id) {
  auto eng = make_engine({seed, 0x7a4d0ULL, id});
  std::vector<T> out(size);
  for (auto& v : out) v = T(uniform01(eng));
  return out;
}

}  // namespace saleval
