#pragma once

// Layered feed-forward networks with a layer-granular reverse-mode tape.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "saleval/error.hpp"
#include "saleval/layers.hpp"
#include "saleval/rng.hpp"
#include "saleval/tensor.hpp"

namespace saleval {

template <typename T>
struct Layer {
  LayerSpec spec;
  Shape in_shape;   // per sample
  Shape out_shape;  // per sample
  AlignedVector<T> weight;
  AlignedVector<T> bias;
};

template <typename T>
class Network {
 public:
  Network() = default;

  /// Builds the layer stack and checks that consecutive shapes compose.
  /// Parameters are zero until init() or load.
  Network(Shape input_shape, const std::vector<LayerSpec>& specs) : input_shape_(std::move(input_shape)) {
    Shape cur = input_shape_;
    for (const auto& spec : specs) {
      Layer<T> layer;
      layer.spec = spec;
      layer.in_shape = cur;
      layer.out_shape = infer_output_shape(spec, cur);
      layer.weight.assign(spec.weight_count(), T{0});
      layer.bias.assign(spec.bias_count(), T{0});
      cur = layer.out_shape;
      layers_.push_back(std::move(layer));
    }
  }

  /// He-uniform weights, zero biases.
  void init(std::uint64_t seed) {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      auto& layer = layers_[l];
      if (!layer.spec.has_params()) continue;
      auto eng = make_engine({seed, 0x1a7e12ULL, l});
      const double bound = std::sqrt(6.0 / static_cast<double>(layer.spec.fan_in()));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& w : layer.weight) w = static_cast<T>(dist(eng));
      std::fill(layer.bias.begin(), layer.bias.end(), T{0});
    }
  }

  const Shape& input_shape() const noexcept { return input_shape_; }
  Shape output_shape() const { return layers_.empty() ? input_shape_ : layers_.back().out_shape; }
  std::vector<Layer<T>>& layers() noexcept { return layers_; }
  const std::vector<Layer<T>>& layers() const noexcept { return layers_; }

  std::vector<LayerSpec> specs() const {
    std::vector<LayerSpec> out;
    for (const auto& l : layers_) out.push_back(l.spec);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
  }

  /// Network made of layers [first, last).
  Network slice(std::size_t first, std::size_t last) const {
    Network out;
    out.input_shape_ = first < layers_.size() ? layers_[first].in_shape : output_shape();
    out.layers_.assign(layers_.begin() + static_cast<std::ptrdiff_t>(first),
                       layers_.begin() + static_cast<std::ptrdiff_t>(last));
    return out;
  }

  template <typename U>
  Network<U> cast() const {
    Network<U> out(input_shape_, specs());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      out.layers()[l].weight.assign(layers_[l].weight.begin(), layers_[l].weight.end());
      out.layers()[l].bias.assign(layers_[l].bias.begin(), layers_[l].bias.end());
    }
    return out;
  }

  friend bool operator==(const Network& a, const Network& b) {
    if (a.input_shape_ != b.input_shape_ || a.layers_.size() != b.layers_.size()) return false;
    for (std::size_t l = 0; l < a.layers_.size(); ++l) {
      const auto &x = a.layers_[l], &y = b.layers_[l];
      if (!(x.spec == y.spec) || x.weight != y.weight || x.bias != y.bias) return false;
    }
    return true;
  }

 private:
  Shape input_shape_;
  std::vector<Layer<T>> layers_;
};

template <typename T>
struct TapeRecord {
  Tensor<T> input;
  Tensor<T> output;                    // kept for sigmoid only
  std::vector<std::uint32_t> argmax;  // maxpool2d winners
};

/// Saved activations of one recorded forward pass; single use.
template <typename T>
class Tape {
 public:
  Tape(const Network<T>* net, Shape output_shape) : net_(net), output_shape_(std::move(output_shape)) {}

  const Network<T>& network() const { return *net_; }
  const std::vector<TapeRecord<T>>& records() const { return records_; }
  std::vector<TapeRecord<T>>& records() { return records_; }
  const Shape& output_shape() const { return output_shape_; }
  bool consumed() const noexcept { return consumed_; }

  void consume() {
    require(!consumed_, ErrorKind::TapeConsumed, "backward already ran on this tape");
    consumed_ = true;
  }
  void release() { records_.clear(); }

 private:
  const Network<T>* net_;
  Shape output_shape_;
  std::vector<TapeRecord<T>> records_;
  bool consumed_ = false;
};

template <typename T>
struct ForwardResult {
  Tensor<T> output;
  std::optional<Tape<T>> tape;
};

template <typename T>
struct LayerGrad {
  AlignedVector<T> weight;
  AlignedVector<T> bias;
};

template <typename T>
struct Gradients {
  std::vector<LayerGrad<T>> layers;  // aligned with Network::layers(); empty for parameter-free layers
  Tensor<T> input_grad;
};

/// How ReLU propagates the upstream signal. `guided` passes only positive
/// signal through units with positive input.
enum class ReluRule { standard, guided };

struct BackwardOptions {
  ReluRule relu = ReluRule::standard;
  bool param_grads = true;
};

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

struct ConvGeom {
  std::size_t cin, h, w, cout, oh, ow, k, stride, pad;
  std::size_t patch() const { return cin * k * k; }
  std::size_t opix() const { return oh * ow; }
};

inline ConvGeom conv_geom(const LayerSpec& s, const Shape& in, const Shape& out) {
  return {in[0], in[1], in[2], out[0], out[1], out[2], s.kernel, s.stride, s.padding};
}

// Output columns [lo, hi) whose input column ox*stride + kx - pad is in range.
inline std::pair<std::size_t, std::size_t> valid_span(std::size_t out, std::size_t in, std::size_t stride,
                                                      std::size_t k, std::size_t pad) {
  std::size_t lo = 0;
  while (lo < out && lo * stride + k < pad) ++lo;
  std::size_t hi = lo;
  while (hi < out && hi * stride + k < pad + in) ++hi;
  return {lo, hi};
}

// col is [patch x opix] for one sample.
template <typename T>
void im2col(const T* xn, const ConvGeom& g, AlignedVector<T>& col) {
  col.assign(g.patch() * g.opix(), T{0});
  for (std::size_t c = 0; c < g.cin; ++c)
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      const auto [ylo, yhi] = valid_span(g.oh, g.h, g.stride, ky, g.pad);
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const auto [xlo, xhi] = valid_span(g.ow, g.w, g.stride, kx, g.pad);
        T* dst = col.data() + ((c * g.k + ky) * g.k + kx) * g.opix();
        const std::size_t stride = g.stride, ow = g.ow;
        for (std::size_t oy = ylo; oy < yhi; ++oy) {
          const T* src = xn + (c * g.h + oy * stride + ky - g.pad) * g.w + kx - g.pad;
          T* d = dst + oy * ow;
          if (stride == 1)
            std::copy(src + xlo, src + xhi, d + xlo);
          else
            for (std::size_t ox = xlo; ox < xhi; ++ox) d[ox] = src[ox * stride];
        }
      }
    }
}

template <typename T>
void add_row(T* __restrict dst, const T* __restrict src, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
}

template <typename T>
void col2im(const AlignedVector<T>& col, const ConvGeom& g, T* dxn) {
  for (std::size_t c = 0; c < g.cin; ++c)
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      const auto [ylo, yhi] = valid_span(g.oh, g.h, g.stride, ky, g.pad);
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const auto [xlo, xhi] = valid_span(g.ow, g.w, g.stride, kx, g.pad);
        const T* src = col.data() + ((c * g.k + ky) * g.k + kx) * g.opix();
        const std::size_t stride = g.stride, ow = g.ow;
        for (std::size_t oy = ylo; oy < yhi; ++oy) {
          T* dst = dxn + (c * g.h + oy * stride + ky - g.pad) * g.w + kx - g.pad;
          const T* s = src + oy * ow;
          if (stride == 1)
            add_row(dst + xlo, s + xlo, xhi - xlo);
          else
            for (std::size_t ox = xlo; ox < xhi; ++ox) dst[ox * stride] += s[ox];
        }
      }
    }
}

template <typename T>
Tensor<T> dense_forward(const Layer<T>& L, const Tensor<T>& x) {
  const std::size_t n = x.dim(0);
  Tensor<T> y({n, L.spec.out});
  CMapMat<T> X(x.data(), n, L.spec.in);
  CMapMat<T> W(L.weight.data(), L.spec.out, L.spec.in);
  MapMat<T> Y(y.data(), n, L.spec.out);
  Y.noalias() = X * W.transpose();
  Y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(L.bias.data(), L.spec.out);
  return y;
}

// Samples are processed one at a time so the im2col block stays in cache;
// each sample's result is also independent of the batch it arrives in.
template <typename T>
Tensor<T> conv_forward(const Layer<T>& L, const Tensor<T>& x) {
  const std::size_t n = x.dim(0);
  const auto g = conv_geom(L.spec, L.in_shape, L.out_shape);
  Shape shape{n};
  shape.insert(shape.end(), L.out_shape.begin(), L.out_shape.end());
  Tensor<T> y(shape);
  CMapMat<T> W(L.weight.data(), g.cout, g.patch());
  const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bias(L.bias.data(), g.cout);
  AlignedVector<T> col;
  for (std::size_t b = 0; b < n; ++b) {
    im2col(x.data() + b * g.cin * g.h * g.w, g, col);
    MapMat<T> Y(y.data() + b * g.cout * g.opix(), g.cout, g.opix());
    Y.noalias() = W * CMapMat<T>(col.data(), g.patch(), g.opix());
    Y.colwise() += bias;
  }
  return y;
}

template <typename T>
void relu_backward(const T* __restrict x, const T* __restrict dy, T* __restrict dx, std::size_t n, bool guided) {
  for (std::size_t i = 0; i < n; ++i) {
    const bool open = x[i] > T{0} && (!guided || dy[i] > T{0});
    dx[i] = open ? dy[i] : T{0};
  }
}

// dst[j] += sum of src[j*f .. j*f+f).
template <typename T>
void pool_row(T* __restrict dst, const T* __restrict src, std::size_t w, std::size_t f) {
  for (std::size_t j = 0; j < w; ++j) {
    T acc = T{0};
    for (std::size_t r = 0; r < f; ++r) acc += src[j * f + r];
    dst[j] += acc;
  }
}

template <typename T>
Shape batch_shape(std::size_t n, const Shape& per) {
  Shape s{n};
  s.insert(s.end(), per.begin(), per.end());
  return s;
}

}  // namespace detail

/// Runs the network on a batch x = [N, input_shape...]. With `record`, the
/// returned tape holds what backward() needs.
template <typename T>
ForwardResult<T> forward(const Network<T>& net, const Tensor<T>& x, bool record = false) {
  const Shape& in = net.input_shape();
  require(x.rank() == in.size() + 1 && std::equal(in.begin(), in.end(), x.shape().begin() + 1),
          ErrorKind::ShapeMismatch, "network expects [N]+" + shape_str(in) + ", got " + shape_str(x.shape()));
  const std::size_t n = x.dim(0);
  ForwardResult<T> result;
  if (record) result.tape.emplace(&net, detail::batch_shape<T>(n, net.output_shape()));
  Tensor<T> cur = x;
  for (const auto& L : net.layers()) {
    TapeRecord<T> rec;
    Tensor<T> next;
    switch (L.spec.kind) {
      case LayerKind::dense:
        next = detail::dense_forward(L, cur);
        break;
      case LayerKind::conv2d:
        next = detail::conv_forward(L, cur);
        break;
      case LayerKind::relu:
        next = cur;
        for (auto& v : next.storage()) v = v > T{0} ? v : T{0};
        break;
      case LayerKind::sigmoid:
        next = cur;
        for (auto& v : next.storage()) v = T{1} / (T{1} + std::exp(-v));
        if (record) rec.output = next;
        break;
      case LayerKind::flatten:
      case LayerKind::reshape:
        next = cur.reshaped(detail::batch_shape<T>(n, L.out_shape));
        break;
      case LayerKind::maxpool2d: {
        const std::size_t c = L.in_shape[0], h = L.in_shape[1], w = L.in_shape[2], k = L.spec.kernel;
        const std::size_t oh = h / k, ow = w / k;
        next = Tensor<T>(detail::batch_shape<T>(n, L.out_shape));
        if (record) rec.argmax.resize(next.size());
        for (std::size_t b = 0; b < n; ++b)
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t plane = (b * c + ch) * h * w;
            for (std::size_t oy = 0; oy < oh; ++oy)
              for (std::size_t ox = 0; ox < ow; ++ox) {
                std::size_t best = plane + (oy * k) * w + ox * k;
                for (std::size_t ky = 0; ky < k; ++ky)
                  for (std::size_t kx = 0; kx < k; ++kx) {
                    const std::size_t idx = plane + (oy * k + ky) * w + ox * k + kx;
                    if (cur[idx] > cur[best]) best = idx;
                  }
                const std::size_t o = ((b * c + ch) * oh + oy) * ow + ox;
                next[o] = cur[best];
                if (record) rec.argmax[o] = static_cast<std::uint32_t>(best);
              }
          }
        break;
      }
      case LayerKind::upsample2d: {
        const std::size_t c = L.in_shape[0], h = L.in_shape[1], w = L.in_shape[2], f = L.spec.factor;
        next = Tensor<T>(detail::batch_shape<T>(n, L.out_shape));
        for (std::size_t plane = 0; plane < n * c; ++plane)
          for (std::size_t y = 0; y < h * f; ++y) {
            const T* src = cur.data() + (plane * h + y / f) * w;
            T* dst = next.data() + (plane * h * f + y) * w * f;
            for (std::size_t xx = 0; xx < w; ++xx)
              for (std::size_t r = 0; r < f; ++r) dst[xx * f + r] = src[xx];
          }
        break;
      }
    }
    if (record) {
      rec.input = std::move(cur);
      result.tape->records().push_back(std::move(rec));
    }
    cur = std::move(next);
  }
  result.output = std::move(cur);
  return result;
}

/// Reverse pass over a recorded tape. `upstream` is dLoss/dOutput.
template <typename T>
Gradients<T> backward(Tape<T>& tape, const Tensor<T>& upstream, const BackwardOptions& opts = {}) {
  tape.consume();
  require(upstream.shape() == tape.output_shape(), ErrorKind::ShapeMismatch,
          "upstream " + shape_str(upstream.shape()) + " vs output " + shape_str(tape.output_shape()));
  const auto& net = tape.network();
  auto& records = tape.records();
  Gradients<T> grads;
  grads.layers.resize(net.layers().size());
  Tensor<T> dy = upstream;
  for (std::size_t li = net.layers().size(); li-- > 0;) {
    const auto& L = net.layers()[li];
    const auto& rec = records[li];
    const Tensor<T>& x = rec.input;
    const std::size_t n = x.dim(0);
    Tensor<T> dx;
    switch (L.spec.kind) {
      case LayerKind::dense: {
        detail::CMapMat<T> X(x.data(), n, L.spec.in);
        detail::CMapMat<T> W(L.weight.data(), L.spec.out, L.spec.in);
        detail::CMapMat<T> DY(dy.data(), n, L.spec.out);
        if (opts.param_grads) {
          auto& g = grads.layers[li];
          g.weight.resize(L.weight.size());
          g.bias.resize(L.bias.size());
          detail::MapMat<T>(g.weight.data(), L.spec.out, L.spec.in).noalias() = DY.transpose() * X;
          Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(g.bias.data(), L.spec.out) = DY.colwise().sum();
        }
        dx = Tensor<T>(x.shape());
        detail::MapMat<T>(dx.data(), n, L.spec.in).noalias() = DY * W;
        break;
      }
      case LayerKind::conv2d: {
        const auto g = detail::conv_geom(L.spec, L.in_shape, L.out_shape);
        detail::CMapMat<T> W(L.weight.data(), g.cout, g.patch());
        AlignedVector<T> col, dcol(g.patch() * g.opix());
        detail::RowMat<T> gw;
        Eigen::Matrix<T, Eigen::Dynamic, 1> gb;
        if (opts.param_grads) {
          gw = detail::RowMat<T>::Zero(g.cout, g.patch());
          gb = Eigen::Matrix<T, Eigen::Dynamic, 1>::Zero(g.cout);
        }
        dx = Tensor<T>(x.shape());
        for (std::size_t b = 0; b < n; ++b) {
          detail::CMapMat<T> D(dy.data() + b * g.cout * g.opix(), g.cout, g.opix());
          if (opts.param_grads) {
            detail::im2col(x.data() + b * g.cin * g.h * g.w, g, col);
            gw.noalias() += D * detail::CMapMat<T>(col.data(), g.patch(), g.opix()).transpose();
            gb += D.rowwise().sum();
          }
          detail::MapMat<T>(dcol.data(), g.patch(), g.opix()).noalias() = W.transpose() * D;
          detail::col2im(dcol, g, dx.data() + b * g.cin * g.h * g.w);
        }
        if (opts.param_grads) {
          auto& lg = grads.layers[li];
          lg.weight.assign(gw.data(), gw.data() + gw.size());
          lg.bias.assign(gb.data(), gb.data() + gb.size());
        }
        break;
      }
      case LayerKind::relu:
        dx = Tensor<T>(x.shape());
        detail::relu_backward(x.data(), dy.data(), dx.data(), dx.size(), opts.relu == ReluRule::guided);
        break;
      case LayerKind::sigmoid:
        dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= rec.output[i] * (T{1} - rec.output[i]);
        break;
      case LayerKind::flatten:
      case LayerKind::reshape:
        dx = std::move(dy).reshaped(x.shape());
        break;
      case LayerKind::maxpool2d:
        dx = Tensor<T>(x.shape());
        for (std::size_t o = 0; o < dy.size(); ++o) dx[rec.argmax[o]] += dy[o];
        break;
      case LayerKind::upsample2d: {
        const std::size_t c = L.in_shape[0], h = L.in_shape[1], w = L.in_shape[2], f = L.spec.factor;
        dx = Tensor<T>(x.shape());
        for (std::size_t plane = 0; plane < n * c; ++plane)
          for (std::size_t y = 0; y < h * f; ++y)
            detail::pool_row(dx.data() + (plane * h + y / f) * w, dy.data() + (plane * h * f + y) * w * f, w, f);
        break;
      }
    }
    dy = std::move(dx);
  }
  grads.input_grad = std::move(dy);
  tape.release();
  return grads;
}

/// Forward without recording, for inference.
template <typename T>
Tensor<T> predict(const Network<T>& net, const Tensor<T>& x) {
  return forward(net, x, false).output;
}

}  // namespace saleval
