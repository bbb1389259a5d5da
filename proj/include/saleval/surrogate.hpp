#pragma once

// Perturbation explanations: LIME and KernelSHAP. The regression core works on
// a generic mask scorer so it can be checked against analytic models; the
// network wrappers below feed it the classifier's target logit.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "saleval/error.hpp"
#include "saleval/linalg.hpp"
#include "saleval/network.hpp"
#include "saleval/rng.hpp"
#include "saleval/segmentation.hpp"

namespace saleval {

using Mask = std::vector<std::uint8_t>;  // 1 = segment kept
using MaskScorer = std::function<std::vector<double>(const std::vector<Mask>&)>;

struct LimeConfig {
  std::size_t n_samples = 1000;
  double kernel_width = 0.25;
  double ridge = 1e-3;
  bool exhaustive = false;  // every mask once instead of sampling
};

struct KernelShapConfig {
  std::size_t n_samples = 2148;  // 2M + 2048 at M = 50
  double ridge = 1e-3;
  bool exhaustive = false;  // every coalition with its exact kernel weight
};

struct SurrogateFit {
  std::vector<double> coef;
  double intercept = 0.0;
  std::size_t evaluations = 0;
};

inline std::vector<Mask> all_masks(int m) {
  require(m >= 1 && m <= 20, ErrorKind::InvalidArgument, "exhaustive enumeration supports 1..20 segments");
  std::vector<Mask> out(std::size_t{1} << m, Mask(std::size_t(m)));
  for (std::size_t bits = 0; bits < out.size(); ++bits)
    for (int j = 0; j < m; ++j) out[bits][std::size_t(j)] = std::uint8_t((bits >> j) & 1u);
  return out;
}

inline std::size_t mask_size(const Mask& z) { return std::size_t(std::count(z.begin(), z.end(), std::uint8_t{1})); }

/// exp(-d^2 / width^2) with d the cosine distance between z and all-ones.
inline double lime_kernel(const Mask& z, double width) {
  const double kept = double(mask_size(z));
  const double d = kept == 0 ? 1.0 : 1.0 - std::sqrt(kept / double(z.size()));
  return std::exp(-d * d / (width * width));
}

/// (M-1) / (C(M,k) k (M-k)) for 0 < k < M.
inline double shapley_kernel(int m, int k) {
  require(k > 0 && k < m, ErrorKind::InvalidArgument, "Shapley kernel is infinite at sizes 0 and M");
  const double log_binom = std::lgamma(m + 1.0) - std::lgamma(k + 1.0) - std::lgamma(m - k + 1.0);
  return double(m - 1) / (std::exp(log_binom) * k * (m - k));
}

namespace detail {

inline Matrix mask_matrix(const std::vector<Mask>& masks, int m) {
  Matrix z(Eigen::Index(masks.size()), m);
  for (std::size_t i = 0; i < masks.size(); ++i)
    for (int j = 0; j < m; ++j) z(Eigen::Index(i), j) = masks[i][std::size_t(j)];
  return z;
}

/// Weighted ridge with an unpenalized intercept (solved after centering) or
/// without intercept.
inline SurrogateFit weighted_ridge(const Matrix& x, const Vector& y, const Vector& w, double ridge,
                                   bool intercept) {
  const double sw = w.sum();
  require(sw > 0.0, ErrorKind::SingularRegression, "all sample weights are zero");
  Vector xbar = Vector::Zero(x.cols());
  double ybar = 0.0;
  if (intercept) {
    xbar = (x.transpose() * w) / sw;
    ybar = w.dot(y) / sw;
  }
  const Matrix xc = x.rowwise() - xbar.transpose();
  const Vector yc = y.array() - ybar;
  Matrix a = xc.transpose() * w.asDiagonal() * xc;
  a.diagonal().array() += ridge;
  const Vector b = xc.transpose() * (w.asDiagonal() * yc);
  const Vector beta = solve_symmetric(a, b);
  SurrogateFit fit;
  fit.coef.assign(beta.data(), beta.data() + beta.size());
  fit.intercept = ybar - xbar.dot(beta);
  return fit;
}

}  // namespace detail

inline SurrogateFit lime_fit(int m, const MaskScorer& score, const LimeConfig& cfg, Engine& eng) {
  require(m >= 1, ErrorKind::InvalidArgument, "need at least one segment");
  require(cfg.kernel_width > 0.0 && cfg.ridge >= 0.0, ErrorKind::InvalidArgument, "bad LIME configuration");
  std::vector<Mask> masks;
  if (cfg.exhaustive) {
    masks = all_masks(m);
  } else {
    require(cfg.n_samples >= 1, ErrorKind::InvalidArgument, "n_samples must be positive");
    masks.assign(cfg.n_samples, Mask(std::size_t(m)));
    for (auto& z : masks)
      for (auto& bit : z) bit = std::uint8_t(uniform01(eng) < 0.5);
  }
  const auto f = score(masks);
  Vector y = Eigen::Map<const Vector>(f.data(), Eigen::Index(f.size()));
  Vector w(Eigen::Index(masks.size()));
  for (std::size_t i = 0; i < masks.size(); ++i) w(Eigen::Index(i)) = lime_kernel(masks[i], cfg.kernel_width);
  auto fit = detail::weighted_ridge(detail::mask_matrix(masks, m), y, w, cfg.ridge, true);
  fit.evaluations = masks.size();
  return fit;
}

/// KernelSHAP with the efficiency constraint sum(phi) = f(full) - f(empty)
/// enforced by eliminating the last segment. `intercept` holds f(empty).
inline SurrogateFit kernel_shap_fit(int m, const MaskScorer& score, const KernelShapConfig& cfg, Engine& eng) {
  require(m >= 1, ErrorKind::InvalidArgument, "need at least one segment");
  require(cfg.ridge >= 0.0, ErrorKind::InvalidArgument, "ridge must be non-negative");
  const auto anchors = score({Mask(std::size_t(m), 0), Mask(std::size_t(m), 1)});
  const double f0 = anchors[0], delta = anchors[1] - anchors[0];
  SurrogateFit fit;
  fit.intercept = f0;
  fit.evaluations = 2;
  if (m == 1) {
    fit.coef = {delta};
    return fit;
  }

  std::vector<Mask> masks;
  std::vector<double> weights;
  if (cfg.exhaustive) {
    for (auto& z : all_masks(m)) {
      const auto k = int(mask_size(z));
      if (k == 0 || k == m) continue;
      weights.push_back(shapley_kernel(m, k));
      masks.push_back(std::move(z));
    }
  } else {
    require(cfg.n_samples >= 2, ErrorKind::InvalidArgument, "n_samples must be at least 2");
    // Sizes drawn in proportion to their total kernel mass; each sample then
    // carries equal weight. Samples come in complementary pairs.
    std::vector<double> cdf(std::size_t(m - 1));
    double acc = 0.0;
    for (int k = 1; k < m; ++k) cdf[std::size_t(k - 1)] = acc += 1.0 / (double(k) * double(m - k));
    std::vector<int> order(static_cast<std::size_t>(m));
    while (masks.size() < cfg.n_samples) {
      const double u = uniform01(eng) * acc;
      const int k = int(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin()) + 1;
      std::iota(order.begin(), order.end(), 0);
      Mask z(std::size_t(m), 0);
      for (int j = 0; j < std::min(k, m - 1); ++j) {
        const auto pick = std::size_t(j) + std::size_t(uniform01(eng) * double(m - j));
        std::swap(order[std::size_t(j)], order[std::min(pick, std::size_t(m - 1))]);
        z[std::size_t(order[std::size_t(j)])] = 1;
      }
      Mask complement(z);
      for (auto& bit : complement) bit ^= 1u;
      masks.push_back(std::move(z));
      if (masks.size() < cfg.n_samples) masks.push_back(std::move(complement));
    }
    weights.assign(masks.size(), 1.0);
  }

  const auto f = score(masks);
  const Matrix z = detail::mask_matrix(masks, m);
  Matrix x(z.rows(), m - 1);
  Vector y(z.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double last = z(i, m - 1);
    for (int j = 0; j < m - 1; ++j) x(i, j) = z(i, j) - last;
    y(i) = f[std::size_t(i)] - f0 - last * delta;
  }
  // Ridge acts on every phi, including the eliminated one:
  // lambda * (|beta|^2 + (delta - 1'beta)^2), which keeps the fit symmetric.
  const Vector w = Eigen::Map<const Vector>(weights.data(), Eigen::Index(weights.size()));
  Matrix a = x.transpose() * w.asDiagonal() * x;
  a.diagonal().array() += cfg.ridge;
  a.array() += cfg.ridge;
  const Vector b = x.transpose() * (w.asDiagonal() * y) + Vector::Constant(m - 1, cfg.ridge * delta);
  const Vector beta = solve_symmetric(a, b);
  fit.coef.assign(beta.data(), beta.data() + beta.size());
  fit.coef.push_back(delta - beta.sum());
  fit.evaluations += masks.size();
  return fit;
}

/// Per-pixel map from per-segment coefficients.
template <typename T>
std::vector<T> broadcast_segments(const Segmentation& seg, std::span<const double> coef) {
  require(coef.size() == std::size_t(seg.count), ErrorKind::ShapeMismatch, "one coefficient per segment required");
  std::vector<T> out(seg.ids.size());
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = T(coef[std::size_t(seg.ids[p])]);
  return out;
}

/// Target logit of the classifier on `image` with unkept segments set to 0.
template <typename T>
MaskScorer logit_scorer(const Network<T>& net, std::span<const T> image, const Segmentation& seg, int target,
                        std::size_t batch = 256) {
  require(image.size() == seg.ids.size() && shape_size(net.input_shape()) == image.size(), ErrorKind::ShapeMismatch,
          "image, segmentation and network input sizes differ");
  return [&net, image, &seg, target, batch](const std::vector<Mask>& masks) {
    std::vector<double> out;
    out.reserve(masks.size());
    const std::size_t per = image.size();
    Shape shape{0};
    shape.insert(shape.end(), net.input_shape().begin(), net.input_shape().end());
    for (std::size_t start = 0; start < masks.size(); start += batch) {
      const std::size_t n = std::min(batch, masks.size() - start);
      shape[0] = n;
      Tensor<T> x(shape);
      for (std::size_t b = 0; b < n; ++b) {
        const auto& z = masks[start + b];
        for (std::size_t p = 0; p < per; ++p) x[b * per + p] = z[std::size_t(seg.ids[p])] ? image[p] : T{0};
      }
      const auto logits = predict(net, x);
      for (std::size_t b = 0; b < n; ++b) out.push_back(double(logits.row(b)[std::size_t(target)]));
    }
    return out;
  };
}

template <typename T>
std::vector<T> lime_explain(const Network<T>& net, std::span<const T> image, int target, const Segmentation& seg,
                            const LimeConfig& cfg, std::uint64_t seed, std::uint32_t id) {
  auto eng = make_engine({seed, 0x11ae0ULL, id});
  const auto fit = lime_fit(seg.count, logit_scorer(net, image, seg, target), cfg, eng);
  return broadcast_segments<T>(seg, fit.coef);
}

template <typename T>
std::vector<T> kernel_shap_explain(const Network<T>& net, std::span<const T> image, int target,
                                   const Segmentation& seg, const KernelShapConfig& cfg, std::uint64_t seed,
                                   std::uint32_t id) {
  auto eng = make_engine({seed, 0x5ba90ULL, id});
  const auto fit = kernel_shap_fit(seg.count, logit_scorer(net, image, seg, target), cfg, eng);
  return broadcast_segments<T>(seg, fit.coef);
}

}  // namespace saleval
