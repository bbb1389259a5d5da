#pragma once

// The three network roles: classifier H, reference autoencoder AE_i and the
// per-method autoencoders AE_F, plus their training loops.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "saleval/error.hpp"
#include "saleval/fpenv.hpp"
#include "saleval/idx.hpp"
#include "saleval/linalg.hpp"
#include "saleval/loss.hpp"
#include "saleval/metrics.hpp"
#include "saleval/network.hpp"
#include "saleval/optim.hpp"
#include "saleval/rng.hpp"

namespace saleval {

inline constexpr std::size_t kLatentDim = 128;
inline constexpr std::size_t kEncoderLayers = 6;

inline const Shape& image_shape() {
  static const Shape s{1, kRows, kCols};
  return s;
}

inline std::vector<LayerSpec> classifier_specs() {
  return {LayerSpec::conv2d(1, 16, 3, 2, 1), LayerSpec::relu(),       LayerSpec::conv2d(16, 32, 3, 2, 1),
          LayerSpec::relu(),                 LayerSpec::flatten(),    LayerSpec::dense(32 * 7 * 7, 64),
          LayerSpec::relu(),                 LayerSpec::dense(64, 10)};
}

/// Encoder: two strided convs and a dense map to the 128-d latent. Decoder
/// mirrors it with nearest-neighbour upsampling and ends in a sigmoid.
inline std::vector<LayerSpec> autoencoder_specs() {
  return {LayerSpec::conv2d(1, 16, 3, 2, 1),
          LayerSpec::relu(),
          LayerSpec::conv2d(16, 32, 3, 2, 1),
          LayerSpec::relu(),
          LayerSpec::flatten(),
          LayerSpec::dense(32 * 7 * 7, kLatentDim),
          LayerSpec::dense(kLatentDim, 32 * 7 * 7),
          LayerSpec::relu(),
          LayerSpec::reshape({32, 7, 7}),
          LayerSpec::upsample2d(2),
          LayerSpec::conv2d(32, 16, 3, 1, 1),
          LayerSpec::relu(),
          LayerSpec::upsample2d(2),
          LayerSpec::conv2d(16, 1, 3, 1, 1),
          LayerSpec::sigmoid()};
}

template <typename T = float>
Network<T> make_classifier(std::uint64_t seed) {
  Network<T> net(image_shape(), classifier_specs());
  net.init(seed);
  return net;
}

template <typename T = float>
Network<T> make_autoencoder(std::uint64_t seed) {
  Network<T> net(image_shape(), autoencoder_specs());
  net.init(seed);
  return net;
}

template <typename T>
Network<T> encoder_of(const Network<T>& ae) {
  require(ae.layers().size() > kEncoderLayers && ae.layers()[kEncoderLayers - 1].out_shape == Shape{kLatentDim},
          ErrorKind::ShapeMismatch, "network is not an autoencoder with a 128-d latent");
  return ae.slice(0, kEncoderLayers);
}

/// [N, 1, 28, 28] tensor from grids.
template <typename T = float>
Tensor<T> images_to_tensor(std::span<const ImageGrid> images) {
  Tensor<T> x({images.size(), 1, kRows, kCols});
  for (std::size_t i = 0; i < images.size(); ++i) std::copy(images[i].begin(), images[i].end(), x.data() + i * kPixels);
  return x;
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::size_t> rows) {
  Shape shape = x.shape();
  shape[0] = rows.size();
  Tensor<T> out(shape);
  const std::size_t per = x.stride0();
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(x.data() + rows[i] * per, per, out.data() + i * per);
  return out;
}

/// predict() in fixed-size chunks to bound tape-free activation memory.
template <typename T>
Tensor<T> predict_batched(const Network<T>& net, const Tensor<T>& x, std::size_t chunk = 256) {
  const std::size_t n = x.dim(0);
  Shape out_shape{n};
  const auto os = net.output_shape();
  out_shape.insert(out_shape.end(), os.begin(), os.end());
  Tensor<T> out(out_shape);
  const std::size_t out_per = shape_size(os);
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t m = std::min(chunk, n - start);
    rows.resize(m);
    std::iota(rows.begin(), rows.end(), start);
    const auto y = predict(net, gather_rows(x, rows));
    std::copy_n(y.data(), m * out_per, out.data() + start * out_per);
  }
  return out;
}

/// Latent codes as rows of a double matrix.
template <typename T>
Matrix encode(const Network<T>& ae, const Tensor<T>& x) {
  const auto z = predict_batched(encoder_of(ae), x);
  Matrix out(Eigen::Index(z.dim(0)), Eigen::Index(kLatentDim));
  for (std::size_t i = 0; i < z.dim(0); ++i)
    for (std::size_t j = 0; j < kLatentDim; ++j) out(Eigen::Index(i), Eigen::Index(j)) = double(z[i * kLatentDim + j]);
  return out;
}

template <typename T>
Tensor<T> reconstruct(const Network<T>& ae, const Tensor<T>& x) {
  return predict_batched(ae, x);
}

struct TrainConfig {
  std::size_t epochs = 10;
  double lr = 1e-3;
  std::size_t batch = 64;
  std::uint64_t seed = 0;      // init and shuffling
  double k_fraction = 0.25;    // Top-K for the autoencoder curves
};

using ProgressFn = std::function<void(const std::string&)>;

/// One row of an autoencoder training curve. `test` averages compare_maps over
/// the held-out pairs.
struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  MetricVector test;
};

using MetricCurve = std::vector<EpochMetrics>;

namespace detail {

inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t tag, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto eng = make_engine({seed, tag, epoch});
  std::shuffle(order.begin(), order.end(), eng);
  return order;
}

inline void check_finite_loss(double loss, const char* what, std::size_t epoch) {
  require(std::isfinite(loss), ErrorKind::DivergedTraining,
          std::string(what) + " loss became non-finite in epoch " + std::to_string(epoch + 1));
}

}  // namespace detail

struct ClassifierResult {
  Network<float> net;
  std::vector<double> epoch_loss;
  double test_accuracy = 0.0;
  bool degenerate = false;  // fewer than two classes in the training labels
};

inline double accuracy(const Network<float>& net, const Tensor<float>& x, std::span<const std::uint8_t> labels) {
  const auto logits = predict_batched(net, x);
  std::size_t hit = 0;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    const auto row = logits.row(b);
    hit += std::size_t(std::max_element(row.begin(), row.end()) - row.begin()) == labels[b];
  }
  return labels.empty() ? 0.0 : double(hit) / double(labels.size());
}

/// Adam on softmax cross-entropy. `test` may be empty, in which case the
/// reported accuracy is measured on the training set.
inline ClassifierResult train_classifier(const LabeledDataset& train, const LabeledDataset& test,
                                         const TrainConfig& cfg, const ProgressFn& progress = {}) {
  require(train.size() > 0, ErrorKind::InvalidArgument, "empty training set");
  require(cfg.batch > 0 && cfg.epochs > 0, ErrorKind::InvalidArgument, "batch and epochs must be positive");
  const FlushDenormals ftz;
  ClassifierResult res{make_classifier(derive_seed({cfg.seed, 0xc1f1ULL})), {}, 0.0, false};
  std::vector<bool> seen(kNumClasses, false);
  for (auto l : train.labels) seen[l] = true;
  res.degenerate = std::count(seen.begin(), seen.end(), true) < 2;
  if (res.degenerate && progress) progress("warning: DegenerateDataset, training labels cover a single class");

  const auto x = images_to_tensor(train.images);
  AdamState<float> state(res.net);
  const AdamConfig adam{cfg.lr};
  std::vector<std::uint8_t> labels;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = detail::epoch_order(train.size(), cfg.seed, 0xc5f1ULL, epoch);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::span<const std::size_t> rows(order.data() + start, std::min(cfg.batch, order.size() - start));
      labels.clear();
      for (auto r : rows) labels.push_back(train.labels[r]);
      auto fr = forward(res.net, gather_rows(x, rows), true);
      const auto loss = loss_softmax_ce(fr.output, labels);
      detail::check_finite_loss(loss.value, "classifier", epoch);
      adam_step(res.net, backward(*fr.tape, loss.grad), state, adam);
      total += loss.value * double(rows.size());
    }
    res.epoch_loss.push_back(total / double(train.size()));
    if (progress)
      progress("classifier epoch " + std::to_string(epoch + 1) + "/" + std::to_string(cfg.epochs) +
               " loss " + std::to_string(res.epoch_loss.back()));
  }
  const auto& eval = test.size() > 0 ? test : train;
  res.test_accuracy = accuracy(res.net, images_to_tensor(eval.images), eval.labels);
  return res;
}

/// Mean of compare_maps over aligned target/reconstruction rows.
template <typename T>
MetricVector mean_metrics(const Tensor<T>& targets, const Tensor<T>& recon, double k_fraction) {
  require_same_shape(targets, recon, "mean_metrics");
  const std::size_t n = targets.dim(0);
  MetricVector acc;
  for (std::size_t i = 0; i < n; ++i) {
    const auto m = compare_maps(targets.row(i), recon.row(i), k_fraction);
    acc.l1 += m.l1;
    acc.mse += m.mse;
    acc.ssim += m.ssim;
    acc.pc += m.pc;
    acc.sc += m.sc;
    acc.ta += m.ta;
  }
  const double inv = n ? 1.0 / double(n) : 0.0;
  return {acc.l1 * inv, acc.mse * inv, acc.ssim * inv, acc.pc * inv, acc.sc * inv, acc.ta * inv};
}

struct AutoencoderResult {
  Network<float> net;
  MetricCurve curve;
};

/// L1-trained autoencoder from inputs to targets (both [N,1,28,28] in [0,1]).
/// Every epoch ends with an evaluation on the held-out pair.
inline AutoencoderResult train_autoencoder(const Tensor<float>& inputs, const Tensor<float>& targets,
                                           const Tensor<float>& test_inputs, const Tensor<float>& test_targets,
                                           const TrainConfig& cfg, const ProgressFn& progress = {}) {
  require_same_shape(inputs, targets, "train_autoencoder");
  require_same_shape(test_inputs, test_targets, "train_autoencoder (test)");
  require(inputs.dim(0) > 0 && cfg.batch > 0 && cfg.epochs > 0, ErrorKind::InvalidArgument,
          "need data, a positive batch size and at least one epoch");
  const FlushDenormals ftz;
  AutoencoderResult res{make_autoencoder(derive_seed({cfg.seed, 0xae1ULL})), {}};
  AdamState<float> state(res.net);
  const AdamConfig adam{cfg.lr};
  const std::size_t n = inputs.dim(0);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = detail::epoch_order(n, cfg.seed, 0xae5ULL, epoch);
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch) {
      const std::span<const std::size_t> rows(order.data() + start, std::min(cfg.batch, n - start));
      auto fr = forward(res.net, gather_rows(inputs, rows), true);
      const auto loss = loss_l1(fr.output, gather_rows(targets, rows));
      detail::check_finite_loss(loss.value, "autoencoder", epoch);
      adam_step(res.net, backward(*fr.tape, loss.grad), state, adam);
      total += loss.value * double(rows.size());
    }
    EpochMetrics row{epoch + 1, total / double(n), {}};
    if (test_inputs.dim(0) > 0) row.test = mean_metrics(test_targets, reconstruct(res.net, test_inputs), cfg.k_fraction);
    res.curve.push_back(row);
    if (progress)
      progress("autoencoder epoch " + std::to_string(epoch + 1) + "/" + std::to_string(cfg.epochs) + " loss " +
               std::to_string(row.train_loss) + " test l1 " + std::to_string(row.test.l1) + " ta " +
               std::to_string(row.test.ta) + " sc " + std::to_string(row.test.sc));
  }
  return res;
}

/// Trailing moving average of `window` points is non-increasing, allowing a
/// relative slack for minibatch noise.
inline bool smoothed_nonincreasing(std::span<const double> values, std::size_t window = 5, double slack = 0.0) {
  if (values.size() < window) return true;
  double prev = 0.0;
  for (std::size_t end = window; end <= values.size(); ++end) {
    double s = 0.0;
    for (std::size_t i = end - window; i < end; ++i) s += values[i];
    s /= double(window);
    if (end > window && s > prev * (1.0 + slack)) return false;
    prev = s;
  }
  return true;
}

}  // namespace saleval
