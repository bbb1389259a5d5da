#include <gtest/gtest.h>

#include <optional>
#include <regex>

#include "saleval/pipeline.hpp"
#include "test_support.hpp"

using namespace saleval;
namespace ts = saleval::testing;

namespace {

template <typename Fn>
std::optional<ErrorKind> kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

// ---- Methods -----------------------------------------------------------------

TEST(Methods, ConventionalNames) {
  EXPECT_EQ(make_method(MethodKind::lime, 100).name, "lime_100");
  EXPECT_EQ(make_method(MethodKind::vanilla, 0, 50).name, "vanilla_sg");
  EXPECT_EQ(make_method(MethodKind::kernel_shap).effective_samples(), 2148u);
  EXPECT_EQ(make_method(MethodKind::lime).effective_samples(), 1000u);
}

TEST(Methods, JsonRoundTrip) {
  auto m = make_method(MethodKind::integrated_gradients, 0, 20, 0.3);
  m.steps = 64;
  const auto back = method_from_json(to_json(m));
  EXPECT_EQ(to_json(back), to_json(m));
  EXPECT_EQ(kind_of([] { method_from_json({{"kind", "deeplift"}}); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] { method_from_json({{"kind", "lime"}, {"name", "a/b"}}); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] { method_from_json({{"kind", "lrp_epsilon"}, {"epsilon", 0.0}}); }), ErrorKind::ConfigError);
}

// ---- Config ------------------------------------------------------------------

TEST(RunConfig, DeskAndFullProfiles) {
  const auto d = RunConfig::desk();
  EXPECT_EQ(d.subset_train, 6000u);
  EXPECT_EQ(d.subset_test, 2000u);
  EXPECT_EQ(d.autoencoder.epochs, 30u);
  EXPECT_EQ(d.s, 100u);
  EXPECT_EQ(d.pair_budget, 500u);
  EXPECT_EQ(d.methods.size(), 8u);
  const auto f = RunConfig::full();
  EXPECT_EQ(f.subset_train, 0u);
  EXPECT_EQ(f.autoencoder.epochs, 100u);
  EXPECT_EQ(f.autoencoder.lr, 1e-5);
  EXPECT_EQ(f.s, 500u);
}

TEST(RunConfig, JsonOverridesProfileAndRoundTrips) {
  const auto c = RunConfig::from_json({{"profile", "full"}, {"seed", 7}, {"autoencoder", {{"epochs", 12}}},
                                       {"methods", {{{"kind", "random"}}}}});
  EXPECT_EQ(c.profile, "full");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.autoencoder.epochs, 12u);
  EXPECT_EQ(c.autoencoder.lr, 1e-5);
  ASSERT_EQ(c.methods.size(), 1u);
  EXPECT_EQ(c.methods[0].name, "random");
  const auto back = RunConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.hash(), c.hash());
}

TEST(RunConfig, HashIgnoresPaths) {
  auto a = RunConfig::desk(), b = RunConfig::desk();
  b.out_dir = "elsewhere";
  b.data_dir = "/tmp";
  EXPECT_EQ(a.hash(), b.hash());
  b.seed = 1;
  EXPECT_NE(a.hash(), b.hash());
}

TEST(RunConfig, InvalidConfigsAreRejected) {
  EXPECT_EQ(kind_of([] { RunConfig::from_json({{"autoencoder", {{"epochs", 5}}}}); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] { RunConfig::from_json({{"k_fraction", 1.0}}); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] { RunConfig::from_json({{"profile", "huge"}}); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] { RunConfig::from_json({{"epochs", 3}}); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] { RunConfig::from_json({{"seed", "x"}}); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] {
              RunConfig::from_json({{"methods", {{{"kind", "vanilla"}}, {{"kind", "vanilla"}}}}});
            }),
            ErrorKind::ConfigError);
}

// ---- Report ------------------------------------------------------------------

ScoreCard card(const std::string& name, double base) {
  return make_score_card(name, Learnability{base, base / 3, base / 7, dl_from_means(base, base / 3, base / 7)},
                         0.1 / 3, base * 0.37, false);
}

MetricCurve ramp(std::size_t epochs, double scale) {
  MetricCurve c;
  for (std::size_t e = 1; e <= epochs; ++e) {
    const double t = double(e) / double(epochs);
    c.push_back({e, 1.0 / double(e), {0.1 * (1 - t), 0.01 * (1 - t), t, scale * t, scale * t * t, 0.25 + t / 2}});
  }
  return c;
}

TEST(Report, EmptyCurvesWriteScoresOnly) {
  const auto dir = ts::temp_dir("report_empty");
  const auto files = emit_report({card("a", 0.4)}, {}, dir);
  EXPECT_EQ(files.size(), 2u);
  EXPECT_TRUE(fs::exists(dir / "scores.csv"));
  EXPECT_TRUE(fs::exists(dir / "scores.json"));
  EXPECT_FALSE(fs::exists(dir / "plots"));
  EXPECT_FALSE(fs::exists(dir / "curves"));
}

TEST(Report, ScoresCsvHasPaperColumns) {
  const auto csv = scores_csv({card("lime_10", 0.3)});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "method,TA,SC,PC,DL,dSC,dFID,VP,S_EM");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
}

TEST(Report, ScoresJsonRoundTripIsBitExact) {
  const auto dir = ts::temp_dir("report_json");
  const std::vector<ScoreCard> cards{card("a", 0.123456789012345), card("b", 1.0 / 3.0)};
  emit_report(cards, {}, dir);
  const auto back = scores_from_json(nlohmann::json::parse(read_text(dir / "scores.json")));
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_TRUE(back[i] == cards[i]);
}

TEST(Report, PlotHasOnePolylinePerMethod) {
  const auto dir = ts::temp_dir("report_svg");
  emit_report({card("a", 0.4), card("b", 0.2)}, {{"a", ramp(30, 0.5)}, {"b", ramp(30, 0.3)}}, dir);
  for (const char* metric : {"l1", "mse", "ssim", "ta", "sc", "pc"}) {
    const auto svg = read_text(dir / "plots" / (std::string(metric) + ".svg"));
    const std::regex poly("<polyline[^>]*points=\"([^\"]*)\"");
    std::size_t lines = 0;
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), poly); it != std::sregex_iterator(); ++it) {
      const std::string pts = (*it)[1];
      EXPECT_EQ(std::count(pts.begin(), pts.end(), ','), 30) << metric;
      ++lines;
    }
    EXPECT_EQ(lines, 2u) << metric;
  }
  const auto csv = read_text(dir / "curves" / "a.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 31);
}

TEST(Report, CurveJsonRoundTripIsBitExact) {
  const auto c = ramp(7, 0.77);
  const auto back = curve_from_json(nlohmann::json::parse(curve_to_json(c).dump()));
  ASSERT_EQ(back.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(back[i].epoch, c[i].epoch);
    EXPECT_EQ(back[i].train_loss, c[i].train_loss);
    for (const auto& m : kCurveMetrics) EXPECT_EQ(back[i].test.*m.field, c[i].test.*m.field);
  }
}

// ---- Explanation generation ----------------------------------------------------

LabeledDataset synthetic(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  const auto x = ts::random_tensor<float>({n, 1, kRows, kCols}, eng, 0.0, 1.0);
  LabeledDataset ds;
  ds.split = Split::test;
  for (std::size_t i = 0; i < n; ++i) {
    ImageGrid g;
    std::copy_n(x.data() + i * kPixels, kPixels, g.pixels.begin());
    ds.images.push_back(g);
    ds.labels.push_back(std::uint8_t(i % 10));
    ds.ids.push_back(std::uint32_t(100 + i));
  }
  return ds;
}

TEST(Explain, SeededMethodsDoNotDependOnBatching) {
  const auto clf = make_classifier(3);
  const auto ds = synthetic(9, 4);
  for (const auto& m : {make_method(MethodKind::random), make_method(MethodKind::lime, 40),
                        make_method(MethodKind::kernel_shap, 120), make_method(MethodKind::vanilla, 0, 3)}) {
    const auto a = generate_explanations(clf, ds, m, 11, {}, 64);
    const auto b = generate_explanations(clf, ds, m, 11, {}, 4);
    ASSERT_EQ(a.size(), 9u);
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t p = 0; p < kPixels; ++p) ASSERT_NEAR(a.maps[i][p], b.maps[i][p], 1e-5) << m.name;
    EXPECT_EQ(a.targets, b.targets);
    EXPECT_EQ(a.ids, ds.ids);
  }
}

TEST(Explain, TargetsAreClassifierArgmax) {
  const auto clf = make_classifier(3);
  const auto ds = synthetic(12, 5);
  const auto set = generate_explanations(clf, ds, make_method(MethodKind::vanilla), 0);
  const auto pred = predicted_classes(clf, images_to_tensor(ds.images));
  for (std::size_t i = 0; i < pred.size(); ++i) EXPECT_EQ(int(set.targets[i]), pred[i]);
  EXPECT_EQ(set.params.at("kind"), "vanilla");
}

TEST(Explain, ZeroSigmaSmoothingIsIdentity) {
  const auto clf = make_classifier(3);
  const auto ds = synthetic(6, 6);
  const auto base = generate_explanations(clf, ds, make_method(MethodKind::input_x_gradients), 2);
  const auto smooth = generate_explanations(clf, ds, make_method(MethodKind::input_x_gradients, 0, 5, 0.0), 2);
  for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_EQ(base.maps[i].pixels, smooth.maps[i].pixels);
}

// ---- End to end on a tiny MNIST subset ------------------------------------------

RunConfig tiny(const fs::path& out) {
  RunConfig c = RunConfig::desk();
  c.data_dir = ts::data_dir();
  c.out_dir = out;
  c.subset_train = 300;
  c.subset_test = 200;
  c.classifier.epochs = 1;
  c.autoencoder.epochs = 2;
  c.window = 2;
  c.s = 6;
  c.pair_budget = 10;
  c.smooth_n = 2;
  return c;
}

class TinyRun : public ::testing::Test {
 protected:
  void SetUp() override {
    if (!ts::have_mnist()) GTEST_SKIP() << "MNIST not found in " << ts::data_dir();
  }
};

TEST_F(TinyRun, ComparisonIsCachedDeterministicAndManifested) {
  const auto dir_a = ts::temp_dir("tiny_a"), dir_b = ts::temp_dir("tiny_b");
  const std::vector<MethodSpec> methods{make_method(MethodKind::vanilla), make_method(MethodKind::random)};
  {
    Pipeline p(tiny(dir_a));
    const auto res = run_method_comparison(p, methods);
    ASSERT_EQ(res.cards.size(), 2u);
    for (const auto& c : res.cards) {
      EXPECT_NEAR(c.dl, (c.ta_mean + c.sc_mean + c.pc_mean) / 3.0, 1e-12);
      EXPECT_NEAR(c.s_em, c.vp * c.dl, 1e-12);
    }
    EXPECT_EQ(res.curves.at("random").size(), 2u);
  }
  const auto csv_a = read_text(dir_a / "reports/method_comparison/scores.csv");
  const auto record = read_text(dir_a / "stages/ae_vanilla.json");

  // Same config, same directory: every stage is reused as is.
  {
    Pipeline p(tiny(dir_a));
    run_method_comparison(p, methods);
  }
  EXPECT_EQ(read_text(dir_a / "stages/ae_vanilla.json"), record);
  EXPECT_EQ(read_text(dir_a / "reports/method_comparison/scores.csv"), csv_a);

  // Same config, fresh directory: byte-identical scores.
  {
    Pipeline p(tiny(dir_b));
    run_method_comparison(p, methods);
  }
  EXPECT_EQ(read_text(dir_b / "reports/method_comparison/scores.csv"), csv_a);

  const auto man = nlohmann::json::parse(read_text(dir_a / "manifest.json"));
  EXPECT_EQ(man.at("config_hash"), hex64(tiny(dir_a).hash()));
  for (const auto& f : man.at("artifacts")) EXPECT_TRUE(fs::exists(dir_a / f.get<std::string>())) << f;
  for (const auto& [stage, info] : man.at("stages").items()) EXPECT_EQ(info.at("status"), "done") << stage;
  for (const char* f : {"models/classifier.ckpt", "models/ae_ref.ckpt", "explanations/vanilla_train.bin",
                        "explanations/random_test.json", "scores/random.json", "reports/method_comparison/plots/ta.svg"})
    EXPECT_NE(std::find(man.at("artifacts").begin(), man.at("artifacts").end(), f), man.at("artifacts").end()) << f;
}

TEST_F(TinyRun, RepeatedSweepEntriesGiveEqualCards) {
  Pipeline p(tiny(ts::temp_dir("tiny_sweep")));
  const auto res = run_lime_sweep(p, {10, 10});
  ASSERT_EQ(res.cards.size(), 2u);
  EXPECT_TRUE(res.cards[0] == res.cards[1]);
  EXPECT_FALSE(res.summary.at("dl_strictly_increasing").get<bool>());
}

TEST_F(TinyRun, ZeroSigmaSmoothGradCardEqualsBase) {
  auto cfg = tiny(ts::temp_dir("tiny_sg"));
  cfg.smooth_sigma = 0.0;
  Pipeline p(cfg);
  const auto res = run_smoothgrad_study(p, {MethodKind::vanilla});
  ASSERT_EQ(res.cards.size(), 2u);
  auto smoothed = res.cards[1];
  EXPECT_EQ(smoothed.method, "vanilla_sg");
  smoothed.method = res.cards[0].method;
  EXPECT_TRUE(smoothed == res.cards[0]);
  EXPECT_EQ(res.summary.at("pairs")[0].at("d_vp").get<double>(), 0.0);
  EXPECT_TRUE(fs::exists(p.run_dir() / "reports/smoothgrad_study/deltas.csv"));
}

TEST_F(TinyRun, EmptyMethodListIsRejected) {
  Pipeline p(tiny(ts::temp_dir("tiny_empty")));
  EXPECT_EQ(kind_of([&] { run_method_comparison(p, {}); }), ErrorKind::NoMethodsConfigured);
}

TEST(Pipeline, FailedStageLeavesMarker) {
  const auto dir = ts::temp_dir("failed_stage");
  auto cfg = tiny(dir);
  cfg.data_dir = dir / "no-such-data";
  Pipeline p(cfg);
  EXPECT_THROW(run_method_comparison(p, {make_method(MethodKind::vanilla)}), Error);
  const auto rec = nlohmann::json::parse(read_text(dir / "stages/classifier.json"));
  EXPECT_EQ(rec.at("status"), "failed");
  EXPECT_FALSE(rec.at("error").get<std::string>().empty());
  const auto man = nlohmann::json::parse(read_text(dir / "manifest.json"));
  EXPECT_EQ(man.at("stages").at("classifier").at("status"), "failed");
}

}  // namespace
