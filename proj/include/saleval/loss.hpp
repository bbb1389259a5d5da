#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>

#include "saleval/error.hpp"
#include "saleval/tensor.hpp"

namespace saleval {

/// Loss value plus its gradient with respect to the prediction, which seeds backward().
template <typename T>
struct LossResult {
  double value = 0.0;
  Tensor<T> grad;
};

/// Mean absolute error over all elements.
template <typename T>
LossResult<T> loss_l1(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same_shape(pred, target, "loss_l1");
  LossResult<T> r{0.0, Tensor<T>(pred.shape())};
  const double inv = 1.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    r.value += std::abs(d);
    r.grad[i] = static_cast<T>(d > 0 ? inv : (d < 0 ? -inv : 0.0));
  }
  r.value *= inv;
  return r;
}

/// Mean squared error over all elements.
template <typename T>
LossResult<T> loss_mse(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same_shape(pred, target, "loss_mse");
  LossResult<T> r{0.0, Tensor<T>(pred.shape())};
  const double inv = 1.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    r.value += d * d;
    r.grad[i] = static_cast<T>(2.0 * d * inv);
  }
  r.value *= inv;
  return r;
}

/// Negative log softmax probability of the label, averaged over the batch. logits: [N, C].
template <typename T>
LossResult<T> loss_softmax_ce(const Tensor<T>& logits, std::span<const std::uint8_t> labels) {
  require(logits.rank() == 2 && logits.dim(0) == labels.size(), ErrorKind::ShapeMismatch,
          "loss_softmax_ce: logits " + shape_str(logits.shape()) + " vs " + std::to_string(labels.size()) + " labels");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  LossResult<T> r{0.0, Tensor<T>(logits.shape())};
  for (std::size_t b = 0; b < n; ++b) {
    require(labels[b] < c, ErrorKind::LabelOutOfRange, "label " + std::to_string(labels[b]));
    const T* z = logits.data() + b * c;
    const double zmax = *std::max_element(z, z + c);
    double sum = 0.0;
    for (std::size_t k = 0; k < c; ++k) sum += std::exp(static_cast<double>(z[k]) - zmax);
    const double log_norm = zmax + std::log(sum);
    r.value += log_norm - static_cast<double>(z[labels[b]]);
    for (std::size_t k = 0; k < c; ++k) {
      const double p = std::exp(static_cast<double>(z[k]) - log_norm);
      r.grad[b * c + k] = static_cast<T>((p - (k == labels[b] ? 1.0 : 0.0)) / static_cast<double>(n));
    }
  }
  r.value /= static_cast<double>(n);
  return r;
}

}  // namespace saleval
