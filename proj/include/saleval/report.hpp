#pragma once

// Score tables, training-curve CSVs and self-contained SVG line plots.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "saleval/error.hpp"
#include "saleval/models.hpp"
#include "saleval/scoring.hpp"

namespace saleval {

using CurveSet = std::map<std::string, MetricCurve>;  // keyed by method name

inline std::string fmt_fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(bool(out), ErrorKind::IoError, "cannot write " + path.string());
  out << text;
  require(bool(out.flush()), ErrorKind::IoError, "write failed for " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(bool(in), ErrorKind::IoError, "cannot read " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// ---- Curves ------------------------------------------------------------------

struct CurveMetric {
  const char* name;
  double MetricVector::*field;
};

inline constexpr std::array<CurveMetric, 6> kCurveMetrics{{{"l1", &MetricVector::l1},
                                                           {"mse", &MetricVector::mse},
                                                           {"ssim", &MetricVector::ssim},
                                                           {"ta", &MetricVector::ta},
                                                           {"sc", &MetricVector::sc},
                                                           {"pc", &MetricVector::pc}}};

inline nlohmann::json curve_to_json(const MetricCurve& curve) {
  auto arr = nlohmann::json::array();
  for (const auto& e : curve) {
    nlohmann::json row{{"epoch", e.epoch}, {"train_loss", e.train_loss}};
    for (const auto& m : kCurveMetrics) row[m.name] = e.test.*m.field;
    arr.push_back(row);
  }
  return arr;
}

inline MetricCurve curve_from_json(const nlohmann::json& j) {
  MetricCurve curve;
  for (const auto& row : j) {
    EpochMetrics e;
    e.epoch = row.at("epoch").get<std::size_t>();
    e.train_loss = row.at("train_loss").get<double>();
    for (const auto& m : kCurveMetrics) e.test.*m.field = row.at(m.name).get<double>();
    curve.push_back(e);
  }
  return curve;
}

inline std::string curve_csv(const MetricCurve& curve) {
  std::string s = "epoch,train_loss,l1,mse,ssim,ta,sc,pc\n";
  for (const auto& e : curve) {
    s += std::to_string(e.epoch) + "," + fmt_fixed(e.train_loss, 8);
    for (const auto& m : kCurveMetrics) s += "," + fmt_fixed(e.test.*m.field, 8);
    s += "\n";
  }
  return s;
}

// ---- Scores ------------------------------------------------------------------

inline std::string scores_csv(const std::vector<ScoreCard>& cards) {
  std::string s = "method,TA,SC,PC,DL,dSC,dFID,VP,S_EM\n";
  for (const auto& c : cards) {
    s += c.method;
    for (double v : {c.ta_mean, c.sc_mean, c.pc_mean, c.dl, c.dsc, c.dfid, c.vp, c.s_em}) s += "," + fmt_fixed(v);
    s += "\n";
  }
  return s;
}

inline nlohmann::json scores_json(const std::vector<ScoreCard>& cards) {
  auto arr = nlohmann::json::array();
  for (const auto& c : cards) arr.push_back(to_json(c));
  return arr;
}

inline std::vector<ScoreCard> scores_from_json(const nlohmann::json& j) {
  std::vector<ScoreCard> cards;
  for (const auto& c : j) cards.push_back(score_card_from_json(c));
  return cards;
}

// ---- SVG ---------------------------------------------------------------------

/// One line plot: x = epoch, one polyline per series.
inline std::string svg_line_plot(const std::string& title, const std::vector<std::string>& names,
                                 const std::vector<std::vector<std::pair<double, double>>>& series) {
  static constexpr std::array<const char*, 10> palette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                                      "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  constexpr double W = 720, H = 420, left = 60, right = 180, top = 40, bottom = 50;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series)
    for (const auto& [x, y] : s) {
      x0 = std::min(x0, x), x1 = std::max(x1, x);
      y0 = std::min(y0, y), y1 = std::max(y1, y);
    }
  if (!(x1 > x0)) x1 = x0 + 1;
  if (!(y1 > y0)) y0 -= 0.5, y1 += 0.5;
  const double pw = W - left - right, ph = H - top - bottom;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (y1 - y) / (y1 - y0) * ph; };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt_fixed(W, 0) + "\" height=\"" +
                  fmt_fixed(H, 0) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + fmt_fixed(left, 0) + "\" y=\"24\" font-size=\"15\">" + title + "</text>\n";
  s += "<rect x=\"" + fmt_fixed(left, 0) + "\" y=\"" + fmt_fixed(top, 0) + "\" width=\"" + fmt_fixed(pw, 0) +
       "\" height=\"" + fmt_fixed(ph, 0) + "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double yv = y0 + (y1 - y0) * t / 4.0, xv = x0 + (x1 - x0) * t / 4.0;
    s += "<text x=\"" + fmt_fixed(left - 6, 1) + "\" y=\"" + fmt_fixed(py(yv) + 4, 1) +
         "\" text-anchor=\"end\">" + fmt_fixed(yv, 3) + "</text>\n";
    s += "<text x=\"" + fmt_fixed(px(xv), 1) + "\" y=\"" + fmt_fixed(top + ph + 18, 1) +
         "\" text-anchor=\"middle\">" + fmt_fixed(xv, 0) + "</text>\n";
  }
  s += "<text x=\"" + fmt_fixed(left + pw / 2, 1) + "\" y=\"" + fmt_fixed(H - 10, 1) +
       "\" text-anchor=\"middle\">epoch</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = palette[i % palette.size()];
    s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < series[i].size(); ++k)
      s += (k ? " " : "") + fmt_fixed(px(series[i][k].first), 2) + "," + fmt_fixed(py(series[i][k].second), 2);
    s += "\"/>\n";
    const double ly = top + 14 + 18 * double(i);
    s += "<line x1=\"" + fmt_fixed(W - right + 12, 1) + "\" y1=\"" + fmt_fixed(ly - 4, 1) + "\" x2=\"" +
         fmt_fixed(W - right + 32, 1) + "\" y2=\"" + fmt_fixed(ly - 4, 1) + "\" stroke=\"" + color +
         "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + fmt_fixed(W - right + 38, 1) + "\" y=\"" + fmt_fixed(ly, 1) + "\">" + names[i] + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

/// scores.csv, scores.json, curves/<method>.csv and plots/<metric>.svg under
/// `outdir`. Returns the written paths. No curves means no curve files or plots.
inline std::vector<std::filesystem::path> emit_report(const std::vector<ScoreCard>& cards, const CurveSet& curves,
                                                      const std::filesystem::path& outdir) {
  std::vector<std::filesystem::path> written;
  auto put = [&](const std::filesystem::path& p, const std::string& text) {
    write_text(p, text);
    written.push_back(p);
  };
  put(outdir / "scores.csv", scores_csv(cards));
  put(outdir / "scores.json", scores_json(cards).dump(1) + "\n");
  if (curves.empty()) return written;
  std::vector<std::string> names;
  for (const auto& [name, curve] : curves) {
    put(outdir / "curves" / (name + ".csv"), curve_csv(curve));
    names.push_back(name);
  }
  for (const auto& m : kCurveMetrics) {
    std::vector<std::vector<std::pair<double, double>>> series;
    for (const auto& [name, curve] : curves) {
      auto& pts = series.emplace_back();
      for (const auto& e : curve) pts.emplace_back(double(e.epoch), e.test.*m.field);
    }
    put(outdir / "plots" / (std::string(m.name) + ".svg"), svg_line_plot(std::string("test ") + m.name, names, series));
  }
  return written;
}

}  // namespace saleval
