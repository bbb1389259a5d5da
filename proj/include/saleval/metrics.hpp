#pragma once

// Pairwise similarity between grids and the Gaussian/Frechet machinery used
// for latent distributions. Everything is computed in double precision.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "saleval/error.hpp"
#include "saleval/linalg.hpp"

namespace saleval {

struct Correlation {
  double value = 0.0;
  bool constant_input = false;  // value is the sentinel 0
};

namespace detail {

template <typename A, typename B>
void require_same_length(std::span<const A> a, std::span<const B> b) {
  require(a.size() == b.size(), ErrorKind::ShapeMismatch,
          "length " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  require(!a.empty(), ErrorKind::ShapeMismatch, "empty input");
}

}  // namespace detail

template <typename T>
double l1_distance(std::span<const T> a, std::span<const T> b) {
  detail::require_same_length(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(double(a[i]) - double(b[i]));
  return s / double(a.size());
}

template <typename T>
double mse(std::span<const T> a, std::span<const T> b) {
  detail::require_same_length(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = double(a[i]) - double(b[i]);
    s += d * d;
  }
  return s / double(a.size());
}

template <typename A, typename B>
Correlation pearson(std::span<const A> a, std::span<const B> b) {
  detail::require_same_length(a, b);
  const double n = double(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += double(a[i]);
    mb += double(b[i]);
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = double(a[i]) - ma, db = double(b[i]) - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return {0.0, true};
  return {std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0), false};
}

/// 1-based ranks; tied values share the average of their positions.
template <typename T>
std::vector<double> average_ranks(std::span<const T> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i + 1;
    while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
    const double r = 0.5 * double(i + 1 + j);  // mean of positions i+1 .. j
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

template <typename A, typename B>
Correlation spearman(std::span<const A> a, std::span<const B> b) {
  detail::require_same_length(a, b);
  const auto ra = average_ranks(a), rb = average_ranks(b);
  return pearson(std::span<const double>(ra), std::span<const double>(rb));
}

inline std::size_t topk_count(std::size_t n, double k_fraction) {
  require(k_fraction > 0.0 && k_fraction < 1.0, ErrorKind::InvalidArgument, "k_fraction must lie in (0,1)");
  // Guard against k*n landing a hair above an integer through rounding.
  const double raw = k_fraction * double(n);
  const double nearest = std::round(raw);
  const auto k = std::abs(raw - nearest) < 1e-9 ? std::size_t(nearest) : std::size_t(std::ceil(raw));
  return std::max<std::size_t>(k, 1);
}

/// Indices of the k largest entries; ties go to the lower index.
template <typename T>
std::vector<std::size_t> topk_indices(std::span<const T> v, std::size_t k) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto before = [&](std::size_t i, std::size_t j) { return v[i] > v[j] || (v[i] == v[j] && i < j); };
  std::nth_element(idx.begin(), idx.begin() + std::ptrdiff_t(k - 1), idx.end(), before);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// |TopK(p) ∩ TopK(p')| / |TopK(p')|.
template <typename A, typename B>
double topk_accuracy(std::span<const A> p, std::span<const B> p_prime, double k_fraction = 0.25) {
  detail::require_same_length(p, p_prime);
  const std::size_t k = topk_count(p.size(), k_fraction);
  const auto ta = topk_indices(p, k), tb = topk_indices(p_prime, k);
  std::size_t common = 0;
  for (std::size_t i = 0, j = 0; i < ta.size() && j < tb.size();) {
    if (ta[i] == tb[j]) {
      ++common;
      ++i;
      ++j;
    } else if (ta[i] < tb[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return double(common) / double(tb.size());
}

/// Single-window SSIM over the whole grid with population statistics.
template <typename T>
double ssim_global(std::span<const T> a, std::span<const T> b, double dynamic_range = 1.0) {
  detail::require_same_length(a, b);
  const double n = double(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += double(a[i]);
    mb += double(b[i]);
  }
  ma /= n;
  mb /= n;
  double va = 0.0, vb = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = double(a[i]) - ma, db = double(b[i]) - mb;
    va += da * da;
    vb += db * db;
    cov += da * db;
  }
  va /= n;
  vb /= n;
  cov /= n;
  const double c1 = std::pow(0.01 * dynamic_range, 2), c2 = std::pow(0.03 * dynamic_range, 2);
  return ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
}

struct MetricVector {
  double l1 = 0, mse = 0, ssim = 0, pc = 0, sc = 0, ta = 0;
};

/// All six measures between a true explanation `p` and its reconstruction.
template <typename T>
MetricVector compare_maps(std::span<const T> p, std::span<const T> reconstructed, double k_fraction = 0.25) {
  MetricVector m;
  m.l1 = l1_distance(p, reconstructed);
  m.mse = mse(p, reconstructed);
  m.ssim = ssim_global(p, reconstructed);
  m.pc = pearson(p, reconstructed).value;
  m.sc = spearman(p, reconstructed).value;
  m.ta = topk_accuracy(p, reconstructed, k_fraction);
  return m;
}

// ---------------------------------------------------------------------------
// Latent Gaussians

struct LatentGaussian {
  Vector mean;
  Matrix cov;
  std::size_t n = 0;
  std::size_t dim() const { return std::size_t(mean.size()); }
};

/// Rows of `samples` are observations. Unbiased covariance, symmetrized.
inline LatentGaussian fit_gaussian(const Matrix& samples) {
  require(samples.rows() >= 2, ErrorKind::TooFewSamples,
          "need at least 2 samples, got " + std::to_string(samples.rows()));
  LatentGaussian g;
  g.n = std::size_t(samples.rows());
  g.mean = samples.colwise().mean().transpose();
  const Matrix centered = samples.rowwise() - g.mean.transpose();
  g.cov = (centered.transpose() * centered) / double(samples.rows() - 1);
  g.cov = 0.5 * (g.cov + g.cov.transpose());
  return g;
}

/// Squared 2-Wasserstein distance between two Gaussians. `sqrt_cov1` may carry
/// a precomputed sqrt_psd(g1.cov) when g1 is compared against many others.
inline double frechet_distance(const LatentGaussian& g1, const LatentGaussian& g2,
                               const Matrix* sqrt_cov1 = nullptr) {
  require(g1.dim() == g2.dim() && std::size_t(g1.cov.rows()) == g1.dim() && std::size_t(g2.cov.rows()) == g2.dim(),
          ErrorKind::DimensionMismatch,
          "dimensions " + std::to_string(g1.dim()) + " and " + std::to_string(g2.dim()));
  const Matrix s1 = sqrt_cov1 ? *sqrt_cov1 : sqrt_psd(g1.cov);
  Matrix inner = s1 * g2.cov * s1;
  inner = 0.5 * (inner + inner.transpose());
  const Matrix cross = sqrt_psd(inner);
  const double d = (g1.mean - g2.mean).squaredNorm() + g1.cov.trace() + g2.cov.trace() - 2.0 * cross.trace();
  return std::max(d, 0.0);
}

}  // namespace saleval
