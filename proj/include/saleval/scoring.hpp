#pragma once

// Distribution Learnability, Variance Proximity and their product S_EM.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "saleval/error.hpp"
#include "saleval/explanations.hpp"
#include "saleval/idx.hpp"
#include "saleval/linalg.hpp"
#include "saleval/metrics.hpp"
#include "saleval/models.hpp"
#include "saleval/rng.hpp"

namespace saleval {

/// Per-map min-max scaling into [0,1]. Returns true for a constant map, which
/// becomes all 0.5.
inline bool normalize_map(std::span<const float> in, std::span<float> out) {
  require(in.size() == out.size(), ErrorKind::ShapeMismatch, "normalize_map size mismatch");
  if (in.empty()) return true;
  const auto [lo_it, hi_it] = std::minmax_element(in.begin(), in.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) {
    std::fill(out.begin(), out.end(), 0.5f);
    return true;
  }
  const double scale = 1.0 / (hi - lo);
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = float(std::clamp((double(in[i]) - lo) * scale, 0.0, 1.0));
  return false;
}

struct NormalizedSet {
  ExplanationSet set;
  std::vector<std::uint8_t> constant;  // 1 where the source map was constant
  std::size_t constant_count = 0;
};

inline NormalizedSet normalize_explanations(const ExplanationSet& set) {
  NormalizedSet out{set, std::vector<std::uint8_t>(set.size(), 0), 0};
  for (std::size_t i = 0; i < set.size(); ++i) {
    out.constant[i] = normalize_map(set.maps[i].view(), out.set.maps[i].pixels);
    out.constant_count += out.constant[i];
  }
  return out;
}

struct Learnability {
  double ta_mean = 0.0;
  double sc_mean = 0.0;
  double pc_mean = 0.0;
  double dl = 0.0;
};

inline double dl_from_means(double ta, double sc, double pc) { return (ta + sc + pc) / 3.0; }

/// Means of test-set TA, SC and PC over the last `window` epochs.
inline Learnability distribution_learnability(std::span<const EpochMetrics> curve, std::size_t window = 10) {
  require(window >= 1, ErrorKind::InvalidArgument, "window must be positive");
  require(curve.size() >= window, ErrorKind::CurveTooShort,
          "curve has " + std::to_string(curve.size()) + " epochs, window is " + std::to_string(window));
  Learnability r;
  for (std::size_t i = curve.size() - window; i < curve.size(); ++i) {
    r.ta_mean += curve[i].test.ta;
    r.sc_mean += curve[i].test.sc;
    r.pc_mean += curve[i].test.pc;
  }
  r.ta_mean /= double(window);
  r.sc_mean /= double(window);
  r.pc_mean /= double(window);
  r.dl = dl_from_means(r.ta_mean, r.sc_mean, r.pc_mean);
  return r;
}

inline double vp_from_deltas(double dsc, double dfid) { return dsc + dfid; }

inline double s_em(double dl, double vp) { return vp * dl; }

/// (inter - intra) / intra. A vanishing intra-class mean marks the degenerate
/// case, for which the term is reported as 0.
inline double dfid_from_means(double fid_inter, double fid_intra, bool* degenerate = nullptr) {
  const bool bad = !(fid_intra > 1e-12);
  if (degenerate) *degenerate = bad;
  return bad ? 0.0 : (fid_inter - fid_intra) / fid_intra;
}

struct ProximityConfig {
  std::size_t s = 100;             // maps per class
  std::size_t pair_budget = 500;   // Spearman pairs per class and per class pair
  std::uint64_t seed = 0;
  bool allow_lower_s = true;       // shrink s to the smallest class instead of failing
};

struct ProximityReport {
  std::size_t s = 0;
  bool s_lowered = false;
  std::vector<std::vector<double>> intra_sc;            // [class][pair]
  std::vector<std::array<int, 2>> class_pairs;          // the 45 (a, b) with a < b
  std::vector<std::vector<double>> inter_sc;            // [class pair][pair]
  std::vector<double> intra_fid;                        // split-half, per class
  std::vector<double> inter_fid;                        // per class pair
  double sc_intra = 0.0, sc_inter = 0.0;
  double fid_intra = 0.0, fid_inter = 0.0;
  double dsc = 0.0, dfid = 0.0, vp = 0.0;
  bool degenerate = false;
};

namespace detail {

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / double(v.size());
}

inline double mean_of_means(const std::vector<std::vector<double>>& groups) {
  double s = 0.0;
  for (const auto& g : groups) s += mean_of(g);
  return groups.empty() ? 0.0 : s / double(groups.size());
}

/// Index pairs (i within a, j within b). Every pair when the budget allows,
/// otherwise `budget` seeded draws. `same` excludes i == j and repeats of (j, i).
inline std::vector<std::array<std::size_t, 2>> draw_pairs(std::size_t s, bool same, std::size_t budget, Engine& eng) {
  std::vector<std::array<std::size_t, 2>> out;
  const std::size_t total = same ? s * (s - 1) / 2 : s * s;
  if (total <= budget) {
    for (std::size_t i = 0; i < s; ++i)
      for (std::size_t j = same ? i + 1 : 0; j < s; ++j) out.push_back({i, j});
    return out;
  }
  std::uniform_int_distribution<std::size_t> any(0, s - 1), other(0, s - 2);
  for (std::size_t k = 0; k < budget; ++k) {
    const std::size_t i = any(eng);
    std::size_t j = same ? other(eng) : any(eng);
    if (same && j >= i) ++j;
    out.push_back({i, j});
  }
  return out;
}

inline LatentGaussian fit_rows(const Matrix& z, Eigen::Index first, Eigen::Index count) {
  return fit_gaussian(z.middleRows(first, count));
}

}  // namespace detail

/// Intra- vs inter-class spread of reconstructed explanations. Spearman is
/// taken between map pairs; Fréchet distances between Gaussians fitted to the
/// reference encoder's latents of those maps.
inline ProximityReport variance_proximity(std::span<const ImageGrid> recon, std::span<const std::uint8_t> labels,
                                          std::span<const std::uint32_t> ids, const Network<float>& ae_ref,
                                          const ProximityConfig& cfg, const ProgressFn& progress = {}) {
  require(recon.size() == labels.size() && recon.size() == ids.size(), ErrorKind::ShapeMismatch,
          "maps, labels and ids must align");
  ProximityReport rep;
  std::array<std::size_t, kNumClasses> counts{};
  for (auto l : labels) {
    require(l < kNumClasses, ErrorKind::LabelOutOfRange, "label " + std::to_string(l));
    ++counts[l];
  }
  const std::size_t smallest = *std::min_element(counts.begin(), counts.end());
  rep.s = cfg.s;
  if (smallest < cfg.s && cfg.allow_lower_s) {
    rep.s = smallest;
    rep.s_lowered = true;
    if (progress) progress("warning: s lowered from " + std::to_string(cfg.s) + " to " + std::to_string(smallest));
  }
  require(rep.s >= 4, ErrorKind::InsufficientClassMembers, "need at least 4 maps per class, have " +
                                                               std::to_string(smallest));
  const std::size_t s = rep.s;
  const auto chosen = select_per_class(labels, ids, s, cfg.seed);

  // Rank vectors for Spearman and latents, both in canonical (id) order per class.
  std::vector<std::vector<std::vector<double>>> ranks(kNumClasses);
  std::vector<ImageGrid> stacked;
  stacked.reserve(kNumClasses * s);
  for (int c = 0; c < kNumClasses; ++c)
    for (auto idx : chosen.at(c)) {
      ranks[std::size_t(c)].push_back(average_ranks(recon[idx].view()));
      stacked.push_back(recon[idx]);
    }
  const Matrix z = encode(ae_ref, images_to_tensor(stacked));
  auto spearman_ranked = [](const std::vector<double>& a, const std::vector<double>& b) {
    return pearson(std::span<const double>(a), std::span<const double>(b)).value;
  };

  const auto half = Eigen::Index(s / 2);
  std::vector<LatentGaussian> full(kNumClasses);
  std::vector<Matrix> full_sqrt(kNumClasses);
  for (int c = 0; c < kNumClasses; ++c) {
    const auto base = Eigen::Index(std::size_t(c) * s);
    auto eng = make_engine({cfg.seed, 0x1a7aULL, std::uint64_t(c)});
    std::vector<double> sc;
    for (auto [i, j] : detail::draw_pairs(s, true, cfg.pair_budget, eng))
      sc.push_back(spearman_ranked(ranks[std::size_t(c)][i], ranks[std::size_t(c)][j]));
    rep.intra_sc.push_back(std::move(sc));
    const auto first = detail::fit_rows(z, base, half);
    const auto second = detail::fit_rows(z, base + half, Eigen::Index(s) - half);
    rep.intra_fid.push_back(frechet_distance(first, second));
    full[std::size_t(c)] = detail::fit_rows(z, base, Eigen::Index(s));
    full_sqrt[std::size_t(c)] = sqrt_psd(full[std::size_t(c)].cov);
  }
  for (int a = 0; a < kNumClasses; ++a)
    for (int b = a + 1; b < kNumClasses; ++b) {
      auto eng = make_engine({cfg.seed, 0x17e4ULL, std::uint64_t(a), std::uint64_t(b)});
      std::vector<double> sc;
      for (auto [i, j] : detail::draw_pairs(s, false, cfg.pair_budget, eng))
        sc.push_back(spearman_ranked(ranks[std::size_t(a)][i], ranks[std::size_t(b)][j]));
      rep.class_pairs.push_back({a, b});
      rep.inter_sc.push_back(std::move(sc));
      rep.inter_fid.push_back(frechet_distance(full[std::size_t(a)], full[std::size_t(b)], &full_sqrt[std::size_t(a)]));
    }

  rep.sc_intra = detail::mean_of_means(rep.intra_sc);
  rep.sc_inter = detail::mean_of_means(rep.inter_sc);
  rep.fid_intra = detail::mean_of(rep.intra_fid);
  rep.fid_inter = detail::mean_of(rep.inter_fid);
  rep.dsc = rep.sc_intra - rep.sc_inter;
  rep.dfid = dfid_from_means(rep.fid_inter, rep.fid_intra, &rep.degenerate);
  rep.vp = vp_from_deltas(rep.dsc, rep.dfid);
  if (rep.degenerate && progress) progress("warning: DegenerateCovariance, intra-class FID vanishes");
  return rep;
}

struct ScoreCard {
  std::string method;
  double ta_mean = 0.0, sc_mean = 0.0, pc_mean = 0.0, dl = 0.0;
  double dsc = 0.0, dfid = 0.0, vp = 0.0, s_em = 0.0;
  bool degenerate = false;

  friend bool operator==(const ScoreCard&, const ScoreCard&) = default;
};

inline ScoreCard make_score_card(std::string method, const Learnability& l, double dsc, double dfid,
                                 bool degenerate = false) {
  ScoreCard c;
  c.method = std::move(method);
  c.ta_mean = l.ta_mean;
  c.sc_mean = l.sc_mean;
  c.pc_mean = l.pc_mean;
  c.dl = dl_from_means(l.ta_mean, l.sc_mean, l.pc_mean);
  c.dsc = dsc;
  c.dfid = dfid;
  c.vp = vp_from_deltas(dsc, dfid);
  c.s_em = s_em(c.dl, c.vp);
  c.degenerate = degenerate;
  return c;
}

inline ScoreCard make_score_card(std::string method, const Learnability& l, const ProximityReport& p) {
  return make_score_card(std::move(method), l, p.dsc, p.dfid, p.degenerate);
}

inline nlohmann::json to_json(const ScoreCard& c) {
  return {{"method", c.method}, {"ta", c.ta_mean}, {"sc", c.sc_mean}, {"pc", c.pc_mean},
          {"dl", c.dl},         {"dsc", c.dsc},    {"dfid", c.dfid},   {"vp", c.vp},
          {"s_em", c.s_em},     {"degenerate", c.degenerate}};
}

inline ScoreCard score_card_from_json(const nlohmann::json& j) {
  ScoreCard c;
  c.method = j.at("method").get<std::string>();
  c.ta_mean = j.at("ta").get<double>();
  c.sc_mean = j.at("sc").get<double>();
  c.pc_mean = j.at("pc").get<double>();
  c.dl = j.at("dl").get<double>();
  c.dsc = j.at("dsc").get<double>();
  c.dfid = j.at("dfid").get<double>();
  c.vp = j.at("vp").get<double>();
  c.s_em = j.at("s_em").get<double>();
  c.degenerate = j.value("degenerate", false);
  return c;
}

inline nlohmann::json to_json(const ProximityReport& r) {
  nlohmann::json pairs = nlohmann::json::array();
  for (auto [a, b] : r.class_pairs) pairs.push_back({a, b});
  std::vector<double> intra_means, inter_means;
  for (const auto& v : r.intra_sc) intra_means.push_back(detail::mean_of(v));
  for (const auto& v : r.inter_sc) inter_means.push_back(detail::mean_of(v));
  return {{"s", r.s},
          {"s_lowered", r.s_lowered},
          {"intra_pairs", r.intra_sc.empty() ? 0 : r.intra_sc.front().size()},
          {"inter_pairs", r.inter_sc.empty() ? 0 : r.inter_sc.front().size()},
          {"intra_sc_mean_by_class", intra_means},
          {"inter_sc_mean_by_pair", inter_means},
          {"class_pairs", pairs},
          {"intra_fid", r.intra_fid},
          {"inter_fid", r.inter_fid},
          {"sc_intra", r.sc_intra},
          {"sc_inter", r.sc_inter},
          {"fid_intra", r.fid_intra},
          {"fid_inter", r.fid_inter},
          {"dsc", r.dsc},
          {"dfid", r.dfid},
          {"vp", r.vp},
          {"degenerate", r.degenerate}};
}

}  // namespace saleval
