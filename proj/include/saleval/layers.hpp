#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "saleval/error.hpp"
#include "saleval/tensor.hpp"

namespace saleval {

enum class LayerKind { dense, conv2d, relu, sigmoid, flatten, reshape, maxpool2d, upsample2d };

inline std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::relu: return "relu";
    case LayerKind::sigmoid: return "sigmoid";
    case LayerKind::flatten: return "flatten";
    case LayerKind::reshape: return "reshape";
    case LayerKind::maxpool2d: return "maxpool2d";
    case LayerKind::upsample2d: return "upsample2d";
  }
  return "?";
}

inline LayerKind layer_kind_from_string(std::string_view s) {
  for (auto k : {LayerKind::dense, LayerKind::conv2d, LayerKind::relu, LayerKind::sigmoid, LayerKind::flatten,
                 LayerKind::reshape, LayerKind::maxpool2d, LayerKind::upsample2d})
    if (to_string(k) == s) return k;
  fail(ErrorKind::ConfigError, "unknown layer kind '" + std::string(s) + "'");
}

/// Architecture of one layer. Which fields matter depends on `kind`:
/// dense uses in/out, conv2d uses in/out as channels plus kernel/stride/padding,
/// maxpool2d uses kernel (stride equals kernel), upsample2d uses factor,
/// reshape uses target (per-sample shape).
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t factor = 0;
  Shape target;

  static LayerSpec dense(std::size_t in, std::size_t out) { return {LayerKind::dense, in, out}; }
  static LayerSpec conv2d(std::size_t cin, std::size_t cout, std::size_t kernel, std::size_t stride = 1,
                          std::size_t padding = 0) {
    return {LayerKind::conv2d, cin, cout, kernel, stride, padding};
  }
  static LayerSpec relu() { return {LayerKind::relu}; }
  static LayerSpec sigmoid() { return {LayerKind::sigmoid}; }
  static LayerSpec flatten() { return {LayerKind::flatten}; }
  static LayerSpec reshape(Shape target) {
    LayerSpec s{LayerKind::reshape};
    s.target = std::move(target);
    return s;
  }
  static LayerSpec maxpool2d(std::size_t kernel) { return {LayerKind::maxpool2d, 0, 0, kernel, kernel}; }
  static LayerSpec upsample2d(std::size_t factor) {
    LayerSpec s{LayerKind::upsample2d};
    s.factor = factor;
    return s;
  }

  bool has_params() const { return kind == LayerKind::dense || kind == LayerKind::conv2d; }

  std::size_t weight_count() const {
    if (kind == LayerKind::dense) return in * out;
    if (kind == LayerKind::conv2d) return out * in * kernel * kernel;
    return 0;
  }
  std::size_t bias_count() const { return has_params() ? out : 0; }
  std::size_t fan_in() const { return kind == LayerKind::conv2d ? in * kernel * kernel : in; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Per-sample output shape; throws ShapeMismatch when the layer cannot consume `in_shape`.
inline Shape infer_output_shape(const LayerSpec& spec, const Shape& in_shape) {
  auto mismatch = [&](const std::string& why) {
    fail(ErrorKind::ShapeMismatch,
         std::string(to_string(spec.kind)) + " cannot take input " + shape_str(in_shape) + ": " + why);
  };
  switch (spec.kind) {
    case LayerKind::dense:
      if (in_shape.size() != 1 || in_shape[0] != spec.in) mismatch("expected [" + std::to_string(spec.in) + "]");
      return {spec.out};
    case LayerKind::conv2d: {
      if (in_shape.size() != 3 || in_shape[0] != spec.in) mismatch("expected " + std::to_string(spec.in) + " channels");
      if (spec.kernel == 0 || spec.stride == 0) mismatch("kernel and stride must be positive");
      const std::size_t h = in_shape[1] + 2 * spec.padding, w = in_shape[2] + 2 * spec.padding;
      if (h < spec.kernel || w < spec.kernel) mismatch("kernel larger than padded input");
      return {spec.out, (h - spec.kernel) / spec.stride + 1, (w - spec.kernel) / spec.stride + 1};
    }
    case LayerKind::relu:
    case LayerKind::sigmoid:
      return in_shape;
    case LayerKind::flatten:
      return {shape_size(in_shape)};
    case LayerKind::reshape:
      if (shape_size(spec.target) != shape_size(in_shape)) mismatch("element count differs from target");
      return spec.target;
    case LayerKind::maxpool2d:
      if (in_shape.size() != 3 || spec.kernel == 0 || in_shape[1] % spec.kernel || in_shape[2] % spec.kernel)
        mismatch("spatial dims must be divisible by the pool size");
      return {in_shape[0], in_shape[1] / spec.kernel, in_shape[2] / spec.kernel};
    case LayerKind::upsample2d:
      if (in_shape.size() != 3 || spec.factor == 0) mismatch("expected [C,H,W] and positive factor");
      return {in_shape[0], in_shape[1] * spec.factor, in_shape[2] * spec.factor};
  }
  fail(ErrorKind::ShapeMismatch, "unknown layer kind");
}

}  // namespace saleval
