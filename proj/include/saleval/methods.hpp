#pragma once

// Named explanation methods and batch generation of their maps over a dataset.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "saleval/attribution.hpp"
#include "saleval/explanations.hpp"
#include "saleval/fpenv.hpp"
#include "saleval/models.hpp"
#include "saleval/segmentation.hpp"
#include "saleval/surrogate.hpp"

namespace saleval {

enum class MethodKind {
  vanilla,
  guided_backprop,
  input_x_gradients,
  integrated_gradients,
  lrp_epsilon,
  lime,
  kernel_shap,
  random,
};

inline constexpr std::array<std::pair<MethodKind, std::string_view>, 8> kMethodIds{{
    {MethodKind::vanilla, "vanilla"},
    {MethodKind::guided_backprop, "guided_backprop"},
    {MethodKind::input_x_gradients, "input_x_gradients"},
    {MethodKind::integrated_gradients, "integrated_gradients"},
    {MethodKind::lrp_epsilon, "lrp_epsilon"},
    {MethodKind::lime, "lime"},
    {MethodKind::kernel_shap, "kernel_shap"},
    {MethodKind::random, "random"},
}};

inline std::string to_string(MethodKind k) {
  for (const auto& [kind, id] : kMethodIds)
    if (kind == k) return std::string(id);
  fail(ErrorKind::InvalidArgument, "unknown method kind");
}

inline MethodKind method_kind_from_string(std::string_view id) {
  for (const auto& [kind, name] : kMethodIds)
    if (name == id) return kind;
  fail(ErrorKind::ConfigError, "unknown method '" + std::string(id) + "'");
}

struct MethodSpec {
  std::string name;  // unique label within a run, e.g. "lime_100" or "vanilla_sg"
  MethodKind kind = MethodKind::vanilla;
  std::size_t n_samples = 0;  // LIME / KernelSHAP; 0 picks the method default
  std::size_t steps = 50;     // integrated gradients
  double epsilon = 0.01;      // LRP
  int segments = 50;
  double kernel_width = 0.25;
  double ridge = 1e-3;
  std::size_t smooth_n = 0;  // SmoothGrad copies; 0 disables the wrapper
  double smooth_sigma = 0.15;

  bool perturbation() const { return kind == MethodKind::lime || kind == MethodKind::kernel_shap; }

  std::size_t effective_samples() const {
    if (n_samples) return n_samples;
    return kind == MethodKind::lime ? 1000 : std::size_t(2 * segments + 2048);
  }
};

/// A spec with the conventional name: the id, "_<n>" for surrogate sample
/// counts and "_sg" when smoothed.
inline MethodSpec make_method(MethodKind kind, std::size_t n_samples = 0, std::size_t smooth_n = 0,
                              double smooth_sigma = 0.15) {
  MethodSpec m;
  m.kind = kind;
  m.n_samples = n_samples;
  m.smooth_n = smooth_n;
  m.smooth_sigma = smooth_sigma;
  m.name = to_string(kind);
  if (m.perturbation() && n_samples) m.name += "_" + std::to_string(n_samples);
  if (smooth_n) m.name += "_sg";
  return m;
}

inline nlohmann::json to_json(const MethodSpec& m) {
  return {{"name", m.name},       {"kind", to_string(m.kind)},   {"n_samples", m.n_samples},
          {"steps", m.steps},     {"epsilon", m.epsilon},        {"segments", m.segments},
          {"kernel_width", m.kernel_width}, {"ridge", m.ridge},  {"smooth_n", m.smooth_n},
          {"smooth_sigma", m.smooth_sigma}};
}

inline MethodSpec method_from_json(const nlohmann::json& j) {
  try {
    MethodSpec m = make_method(method_kind_from_string(j.at("kind").get<std::string>()),
                               j.value("n_samples", std::size_t{0}), j.value("smooth_n", std::size_t{0}),
                               j.value("smooth_sigma", 0.15));
    m.name = j.value("name", m.name);
    m.steps = j.value("steps", m.steps);
    m.epsilon = j.value("epsilon", m.epsilon);
    m.segments = j.value("segments", m.segments);
    m.kernel_width = j.value("kernel_width", m.kernel_width);
    m.ridge = j.value("ridge", m.ridge);
    require(!m.name.empty() && std::all_of(m.name.begin(), m.name.end(),
                                           [](char c) { return std::isalnum((unsigned char)c) || c == '_' || c == '-' || c == '.'; }),
            ErrorKind::ConfigError, "method name '" + m.name + "' must be non-empty and use [A-Za-z0-9_.-]");
    require(m.steps >= 1 && m.segments >= 1 && m.epsilon > 0.0 && m.kernel_width > 0.0 && m.ridge >= 0.0 &&
                m.smooth_sigma >= 0.0,
            ErrorKind::ConfigError, "method '" + m.name + "' has out-of-range parameters");
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("bad method entry: ") + e.what());
  }
}

namespace detail {

/// Raw maps for one batch, before any smoothing.
inline Tensor<float> base_maps(const Network<float>& net, const MethodSpec& m, const Tensor<float>& x,
                               std::span<const int> targets, std::span<const std::uint32_t> ids,
                               std::uint64_t seed) {
  switch (m.kind) {
    case MethodKind::vanilla: return vanilla_gradients(net, x, targets);
    case MethodKind::guided_backprop: return guided_backprop(net, x, targets);
    case MethodKind::input_x_gradients: return input_x_gradients(net, x, targets);
    case MethodKind::integrated_gradients: return integrated_gradients(net, x, targets, m.steps);
    case MethodKind::lrp_epsilon: return lrp_epsilon(net, x, targets, m.epsilon);
    case MethodKind::random: {
      Tensor<float> out(x.shape());
      for (std::size_t b = 0; b < ids.size(); ++b) {
        const auto r = random_map<float>(kPixels, seed, ids[b]);
        std::copy(r.begin(), r.end(), out.row(b).begin());
      }
      return out;
    }
    case MethodKind::lime:
    case MethodKind::kernel_shap: {
      Tensor<float> out(x.shape());
      for (std::size_t b = 0; b < ids.size(); ++b) {
        const auto image = x.row(b);
        const auto seg = segment_grid(image, kRows, kCols, m.segments);
        std::vector<float> map;
        if (m.kind == MethodKind::lime)
          map = lime_explain(net, image, targets[b], seg,
                             LimeConfig{m.effective_samples(), m.kernel_width, m.ridge, false}, seed, ids[b]);
        else
          map = kernel_shap_explain(net, image, targets[b], seg,
                                    KernelShapConfig{m.effective_samples(), m.ridge, false}, seed, ids[b]);
        std::copy(map.begin(), map.end(), out.row(b).begin());
      }
      return out;
    }
  }
  fail(ErrorKind::InvalidArgument, "unhandled method kind");
}

}  // namespace detail

/// Raw signed maps of `m` for every image, explaining the classifier's argmax.
/// Every random draw is keyed by (seed, image id), so a map does not depend on
/// which other images share its batch.
inline ExplanationSet generate_explanations(const Network<float>& net, const LabeledDataset& data,
                                            const MethodSpec& m, std::uint64_t seed,
                                            const ProgressFn& progress = {}, std::size_t batch = 64) {
  require(batch > 0, ErrorKind::InvalidArgument, "batch must be positive");
  const FlushDenormals ftz;
  ExplanationSet set;
  set.method = m.name;
  set.params = to_json(m);
  set.seed = seed;
  set.split = data.split;
  set.ids = data.ids;
  set.labels = data.labels;
  set.targets.resize(data.size());
  set.maps.resize(data.size());

  const std::size_t n = data.size();
  std::size_t reported = 0;
  for (std::size_t start = 0; start < n; start += batch) {
    const std::size_t count = std::min(batch, n - start);
    const auto x = images_to_tensor(std::span<const ImageGrid>(data.images).subspan(start, count));
    const std::span<const std::uint32_t> ids(data.ids.data() + start, count);
    const auto targets = predicted_classes(net, x);
    auto base = [&](const Tensor<float>& in, std::span<const int> t) {
      return detail::base_maps(net, m, in, t, ids, seed);
    };
    const Tensor<float> maps =
        m.smooth_n ? smoothgrad<float>(base, x, targets, ids, m.smooth_n, m.smooth_sigma, seed) : base(x, targets);
    require(maps.all_finite(), ErrorKind::NonFinite, m.name + " produced a non-finite attribution");
    for (std::size_t b = 0; b < count; ++b) {
      set.targets[start + b] = std::uint8_t(targets[b]);
      std::copy_n(maps.data() + b * kPixels, kPixels, set.maps[start + b].pixels.begin());
    }
    if (progress && (start + count - reported >= 1000 || start + count == n)) {
      reported = start + count;
      progress(m.name + " " + to_string(data.split) + ": " + std::to_string(reported) + "/" + std::to_string(n));
    }
  }
  return set;
}

}  // namespace saleval
