#pragma once

// End-to-end runs: data -> classifier -> explanations -> AE_F -> scores, with
// per-stage caching under a run directory and the three experiments on top.
//
// Run directory layout:
//   config.json, manifest.json
//   stages/<stage>.json                 key, status, wall time, outputs
//   models/{classifier,ae_ref,ae_<method>}.ckpt
//   explanations/<method>_{train,test}.{bin,json}
//   curves/{ae_ref,<method>}.json
//   scores/<method>.json
//   reports/<experiment>/...

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "saleval/checkpoint.hpp"
#include "saleval/explanations.hpp"
#include "saleval/idx.hpp"
#include "saleval/methods.hpp"
#include "saleval/models.hpp"
#include "saleval/report.hpp"
#include "saleval/scoring.hpp"

namespace saleval {

namespace fs = std::filesystem;

struct RunConfig {
  std::string profile = "desk";
  fs::path data_dir;
  fs::path out_dir = "runs/desk";
  std::size_t subset_train = 6000;  // 0 = whole split
  std::size_t subset_test = 2000;
  std::uint64_t seed = 0;
  TrainConfig classifier{8, 1e-3, 64};
  TrainConfig autoencoder{30, 1e-3, 64};
  std::size_t s = 100;
  std::size_t pair_budget = 500;
  std::size_t window = 10;
  double k_fraction = 0.25;
  std::vector<MethodSpec> methods;
  std::vector<std::size_t> lime_samples{10, 30, 50, 100, 500};
  std::vector<MethodKind> smooth_bases{MethodKind::vanilla, MethodKind::input_x_gradients,
                                       MethodKind::integrated_gradients};
  std::size_t smooth_n = 50;
  double smooth_sigma = 0.15;

  static std::vector<MethodSpec> comparison_methods(std::size_t lime_n, std::size_t kshap_n) {
    return {make_method(MethodKind::vanilla),
            make_method(MethodKind::guided_backprop),
            make_method(MethodKind::input_x_gradients),
            make_method(MethodKind::integrated_gradients),
            make_method(MethodKind::lrp_epsilon),
            make_method(MethodKind::lime, lime_n),
            make_method(MethodKind::kernel_shap, kshap_n),
            make_method(MethodKind::random)};
  }

  /// 6000/2000 images, 30 AE epochs, s = 100.
  static RunConfig desk() {
    RunConfig c;
    c.methods = comparison_methods(100, 500);
    return c;
  }

  /// The paper's scale: full splits, 100 AE epochs at lr 1e-5, s = 500.
  static RunConfig full() {
    RunConfig c;
    c.profile = "full";
    c.out_dir = "runs/full";
    c.subset_train = 0;
    c.subset_test = 0;
    c.classifier = {10, 1e-3, 64};
    c.autoencoder = {100, 1e-5, 64};
    c.s = 500;
    c.pair_budget = 2000;
    c.methods = comparison_methods(100, 0);
    return c;
  }

  static RunConfig profile_named(const std::string& name) {
    if (name == "desk") return desk();
    if (name == "full") return full();
    fail(ErrorKind::ConfigError, "unknown profile '" + name + "' (expected desk or full)");
  }

  void validate() const {
    require(autoencoder.epochs >= window, ErrorKind::ConfigError,
            "autoencoder epochs (" + std::to_string(autoencoder.epochs) + ") must be at least the DL window (" +
                std::to_string(window) + ")");
    require(window >= 1, ErrorKind::ConfigError, "window must be positive");
    require(k_fraction > 0.0 && k_fraction < 1.0, ErrorKind::ConfigError, "k_fraction must be in (0, 1)");
    require(classifier.epochs >= 1 && classifier.batch >= 1 && autoencoder.batch >= 1, ErrorKind::ConfigError,
            "epochs and batch sizes must be positive");
    require(classifier.lr > 0.0 && autoencoder.lr > 0.0, ErrorKind::ConfigError, "learning rates must be positive");
    require(s >= 4 && pair_budget >= 1, ErrorKind::ConfigError, "s must be at least 4 and pair_budget positive");
    require(smooth_n >= 1 && smooth_sigma >= 0.0, ErrorKind::ConfigError, "bad SmoothGrad settings");
    std::set<std::string> names;
    for (const auto& m : methods)
      require(names.insert(m.name).second, ErrorKind::ConfigError, "duplicate method name '" + m.name + "'");
    for (auto n : lime_samples) require(n >= 1, ErrorKind::ConfigError, "LIME sample counts must be positive");
  }

  /// The fields that determine results (paths excluded).
  nlohmann::json science_json() const {
    auto train = [](const TrainConfig& t) { return nlohmann::json{{"epochs", t.epochs}, {"lr", t.lr}, {"batch", t.batch}}; };
    auto ms = nlohmann::json::array();
    for (const auto& m : methods) ms.push_back(saleval::to_json(m));
    auto bases = nlohmann::json::array();
    for (auto k : smooth_bases) bases.push_back(to_string(k));
    return {{"profile", profile},
            {"subset_train", subset_train},
            {"subset_test", subset_test},
            {"seed", seed},
            {"classifier", train(classifier)},
            {"autoencoder", train(autoencoder)},
            {"s", s},
            {"pair_budget", pair_budget},
            {"window", window},
            {"k_fraction", k_fraction},
            {"methods", ms},
            {"lime_samples", lime_samples},
            {"smooth_bases", bases},
            {"smooth_n", smooth_n},
            {"smooth_sigma", smooth_sigma}};
  }

  nlohmann::json to_json() const {
    auto j = science_json();
    j["data_dir"] = data_dir.string();
    j["out_dir"] = out_dir.string();
    return j;
  }

  std::uint64_t hash() const { return fnv1a(science_json().dump()); }

  /// Starts from the named profile (default desk) and applies every key given.
  static RunConfig from_json(const nlohmann::json& j) {
    try {
      require(j.is_object(), ErrorKind::ConfigError, "config must be a JSON object");
      static const std::set<std::string> known{"profile", "data_dir", "out_dir", "subset_train", "subset_test",
                                               "seed", "classifier", "autoencoder", "s", "pair_budget", "window",
                                               "k_fraction", "methods", "lime_samples", "smooth_bases", "smooth_n",
                                               "smooth_sigma"};
      for (const auto& [key, value] : j.items())
        require(known.count(key) > 0, ErrorKind::ConfigError, "unknown config key '" + key + "'");
      RunConfig c = profile_named(j.value("profile", std::string("desk")));
      if (j.contains("data_dir")) c.data_dir = j["data_dir"].get<std::string>();
      if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
      c.subset_train = j.value("subset_train", c.subset_train);
      c.subset_test = j.value("subset_test", c.subset_test);
      c.seed = j.value("seed", c.seed);
      auto train = [](const nlohmann::json& t, TrainConfig& out) {
        for (const auto& [key, value] : t.items())
          require(key == "epochs" || key == "lr" || key == "batch", ErrorKind::ConfigError,
                  "unknown training key '" + key + "'");
        out.epochs = t.value("epochs", out.epochs);
        out.lr = t.value("lr", out.lr);
        out.batch = t.value("batch", out.batch);
      };
      if (j.contains("classifier")) train(j["classifier"], c.classifier);
      if (j.contains("autoencoder")) train(j["autoencoder"], c.autoencoder);
      c.s = j.value("s", c.s);
      c.pair_budget = j.value("pair_budget", c.pair_budget);
      c.window = j.value("window", c.window);
      c.k_fraction = j.value("k_fraction", c.k_fraction);
      if (j.contains("methods")) {
        c.methods.clear();
        for (const auto& m : j["methods"]) c.methods.push_back(method_from_json(m));
      }
      c.lime_samples = j.value("lime_samples", c.lime_samples);
      if (j.contains("smooth_bases")) {
        c.smooth_bases.clear();
        for (const auto& b : j["smooth_bases"]) c.smooth_bases.push_back(method_kind_from_string(b.get<std::string>()));
      }
      c.smooth_n = j.value("smooth_n", c.smooth_n);
      c.smooth_sigma = j.value("smooth_sigma", c.smooth_sigma);
      c.validate();
      return c;
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::ConfigError, std::string("bad config: ") + e.what());
    }
  }
};

inline RunConfig load_run_config(const fs::path& path) {
  const std::string text = read_text(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ConfigError, path.string() + ": " + e.what());
  }
  return RunConfig::from_json(j);
}

/// Scores and curves of one experiment.
struct ExperimentResult {
  std::string name;
  std::vector<ScoreCard> cards;
  CurveSet curves;
  nlohmann::json summary = nlohmann::json::object();
  std::vector<fs::path> files;
};

class Pipeline {
 public:
  explicit Pipeline(RunConfig cfg, ProgressFn log = {}) : cfg_(std::move(cfg)), log_(std::move(log)) {
    cfg_.validate();
    require(!cfg_.data_dir.empty(), ErrorKind::ConfigError, "no data directory configured");
    fs::create_directories(cfg_.out_dir / "stages");
    write_text(cfg_.out_dir / "config.json", cfg_.to_json().dump(1) + "\n");
  }

  const RunConfig& config() const { return cfg_; }
  const fs::path& run_dir() const { return cfg_.out_dir; }

  std::uint64_t classifier_seed() const { return derive_seed({cfg_.seed, 0xc1a55ULL}); }
  /// AE_i and every AE_F share initialization and shuffling.
  std::uint64_t autoencoder_seed() const { return derive_seed({cfg_.seed, 0xae0ULL}); }
  std::uint64_t explanation_seed() const { return derive_seed({cfg_.seed, 0xe4b1ULL}); }
  std::uint64_t proximity_seed() const { return derive_seed({cfg_.seed, 0x7b0ULL}); }

  const LabeledDataset& train_data() {
    if (!train_) train_ = subsample(load_mnist(cfg_.data_dir, Split::train), cfg_.subset_train, cfg_.seed);
    return *train_;
  }
  const LabeledDataset& test_data() {
    if (!test_) test_ = subsample(load_mnist(cfg_.data_dir, Split::test), cfg_.subset_test, cfg_.seed);
    return *test_;
  }

  // ---- Stages ------------------------------------------------------------------

  std::string classifier_key() const {
    return key_of({{"stage", "classifier"}, {"data", data_json()}, {"train", train_json(cfg_.classifier)}});
  }

  /// Trains (or reuses) the classifier. Returns it with its stage record info.
  Network<float> classifier(nlohmann::json* info_out = nullptr) {
    const auto info = run_stage("classifier", classifier_key(), [&](std::vector<fs::path>& outputs) {
      TrainConfig tc = cfg_.classifier;
      tc.seed = classifier_seed();
      const auto res = train_classifier(train_data(), test_data(), tc, log_);
      log("classifier test accuracy " + fmt_fixed(res.test_accuracy, 4));
      save_checkpoint(path("models/classifier.ckpt"), Checkpoint<float>{res.net, tc.seed, {{"role", "classifier"}}});
      outputs.push_back("models/classifier.ckpt");
      return nlohmann::json{{"test_accuracy", res.test_accuracy}, {"epoch_loss", res.epoch_loss},
                            {"degenerate", res.degenerate}};
    });
    if (info_out) *info_out = info;
    return load_checkpoint<float>(path("models/classifier.ckpt")).net;
  }

  std::string ae_ref_key() const {
    return key_of({{"stage", "ae_ref"}, {"data", data_json()}, {"train", train_json(cfg_.autoencoder)},
                   {"k", cfg_.k_fraction}});
  }

  /// AE_i: the autoencoder reconstructing original images.
  Network<float> ae_ref(MetricCurve* curve_out = nullptr) {
    run_stage("ae_ref", ae_ref_key(), [&](std::vector<fs::path>& outputs) {
      const auto x = images_to_tensor(train_data().images), xt = images_to_tensor(test_data().images);
      const auto res = train_autoencoder(x, x, xt, xt, ae_train_config(), log_);
      save_checkpoint(path("models/ae_ref.ckpt"), Checkpoint<float>{res.net, autoencoder_seed(), {{"role", "ae_ref"}}});
      write_text(path("curves/ae_ref.json"), curve_to_json(res.curve).dump() + "\n");
      outputs.insert(outputs.end(), {"models/ae_ref.ckpt", "curves/ae_ref.json"});
      const auto& last = res.curve.back().test;
      return nlohmann::json{{"test_l1", last.l1}, {"test_ssim", last.ssim}};
    });
    if (curve_out) *curve_out = curve_from_json(nlohmann::json::parse(read_text(path("curves/ae_ref.json"))));
    return load_checkpoint<float>(path("models/ae_ref.ckpt")).net;
  }

  std::string explain_key(const MethodSpec& m) const {
    return key_of({{"stage", "explain"}, {"classifier", classifier_key()}, {"method", to_json(m)}});
  }

  static std::string explanation_file(const MethodSpec& m, Split split) {
    return "explanations/" + m.name + "_" + to_string(split) + ".bin";
  }

  /// Raw explanations of `m` for both splits: train maps are AE_F targets,
  /// test maps are the evaluation set.
  void explanations(const MethodSpec& m) {
    run_stage("explain_" + m.name, explain_key(m), [&](std::vector<fs::path>& outputs) {
      const auto clf = classifier();
      for (const LabeledDataset* ds : {&train_data(), &test_data()}) {
        const auto set = generate_explanations(clf, *ds, m, explanation_seed(), log_);
        const auto file = explanation_file(m, ds->split);
        save_explanations(path(file), set);
        outputs.push_back(file);
        outputs.push_back(sidecar_path(file));
      }
      return nlohmann::json::object();
    });
  }

  ExplanationSet load_method_explanations(const MethodSpec& m, Split split) {
    explanations(m);
    return load_explanations(path(explanation_file(m, split)));
  }

  std::string ae_method_key(const MethodSpec& m) const {
    return key_of({{"stage", "ae_method"}, {"explain", explain_key(m)}, {"train", train_json(cfg_.autoencoder)},
                   {"k", cfg_.k_fraction}});
  }

  /// AE_F for method `m`: original images to normalized explanations.
  MetricCurve method_autoencoder(const MethodSpec& m) {
    const std::string curve_file = "curves/" + m.name + ".json";
    run_stage("ae_" + m.name, ae_method_key(m), [&](std::vector<fs::path>& outputs) {
      const auto train = normalize_explanations(load_method_explanations(m, Split::train));
      const auto test = normalize_explanations(load_method_explanations(m, Split::test));
      if (train.constant_count + test.constant_count > 0)
        log("warning: " + m.name + " has " + std::to_string(train.constant_count + test.constant_count) +
            " constant maps (normalized to 0.5)");
      const auto x = images_to_tensor(train_data().images), xt = images_to_tensor(test_data().images);
      const auto res = train_autoencoder(x, images_to_tensor(train.set.maps), xt, images_to_tensor(test.set.maps),
                                         ae_train_config(), log_);
      const auto ckpt = "models/ae_" + m.name + ".ckpt";
      save_checkpoint(path(ckpt), Checkpoint<float>{res.net, autoencoder_seed(), {{"role", "ae_method"}, {"method", m.name}}});
      write_text(path(curve_file), curve_to_json(res.curve).dump() + "\n");
      outputs.insert(outputs.end(), {ckpt, curve_file});
      return nlohmann::json{{"constant_maps", train.constant_count + test.constant_count}};
    });
    return curve_from_json(nlohmann::json::parse(read_text(path(curve_file))));
  }

  std::string score_key(const MethodSpec& m) const {
    return key_of({{"stage", "score"}, {"ae_method", ae_method_key(m)}, {"ae_ref", ae_ref_key()}, {"s", cfg_.s},
                   {"pair_budget", cfg_.pair_budget}, {"window", cfg_.window}});
  }

  /// DL from the AE_F curve and VP from its test-set reconstructions.
  ScoreCard score(const MethodSpec& m) {
    const std::string file = "scores/" + m.name + ".json";
    run_stage("score_" + m.name, score_key(m), [&](std::vector<fs::path>& outputs) {
      const auto curve = method_autoencoder(m);
      const auto ref = ae_ref();
      const auto ae = load_checkpoint<float>(path("models/ae_" + m.name + ".ckpt")).net;
      const auto& test = test_data();
      const auto recon = reconstruct(ae, images_to_tensor(test.images));
      std::vector<ImageGrid> grids(test.size());
      for (std::size_t i = 0; i < grids.size(); ++i)
        std::copy_n(recon.data() + i * kPixels, kPixels, grids[i].pixels.begin());
      const auto learn = distribution_learnability(curve, cfg_.window);
      const auto prox = variance_proximity(grids, test.labels, test.ids, ref,
                                           ProximityConfig{cfg_.s, cfg_.pair_budget, proximity_seed(), true}, log_);
      const auto card = make_score_card(m.name, learn, prox);
      log(m.name + ": DL " + fmt_fixed(card.dl, 3) + " VP " + fmt_fixed(card.vp, 3) + " S_EM " + fmt_fixed(card.s_em, 3));
      write_text(path(file), nlohmann::json{{"card", to_json(card)}, {"proximity", to_json(prox)}}.dump() + "\n");
      outputs.push_back(file);
      return nlohmann::json::object();
    });
    return score_card_from_json(nlohmann::json::parse(read_text(path(file))).at("card"));
  }

  /// Writes reports/<name>/ and refreshes the manifest.
  void publish(ExperimentResult& res) {
    const auto dir = path("reports/" + res.name);
    res.files = emit_report(res.cards, res.curves, dir);
    write_text(dir / "summary.json", res.summary.dump(1) + "\n");
    res.files.push_back(dir / "summary.json");
    write_manifest();
  }

  /// manifest.json: run id, config hash, stage status and every artifact on disk.
  nlohmann::json write_manifest() {
    nlohmann::json man;
    man["run_id"] = hex64(derive_seed({cfg_.hash(), 0x5a1eULL}));
    man["config_hash"] = hex64(cfg_.hash());
    man["stages"] = nlohmann::json::object();
    std::set<std::string> artifacts{"config.json"};
    std::vector<fs::path> records;
    for (const auto& e : fs::directory_iterator(cfg_.out_dir / "stages"))
      if (e.path().extension() == ".json") records.push_back(e.path());
    std::sort(records.begin(), records.end());
    for (const auto& p : records) {
      const auto rec = nlohmann::json::parse(read_text(p));
      std::string status = rec.at("status").get<std::string>();
      for (const auto& o : rec.at("outputs")) {
        const auto rel = o.get<std::string>();
        if (fs::exists(path(rel)))
          artifacts.insert(rel);
        else
          status = "incomplete";
      }
      artifacts.insert(fs::relative(p, cfg_.out_dir).generic_string());
      man["stages"][p.stem().string()] = {{"status", status},
                                          {"key", rec.at("key")},
                                          {"wall_seconds", rec.at("wall_seconds")}};
    }
    if (fs::exists(path("reports")))
      for (const auto& e : fs::recursive_directory_iterator(path("reports")))
        if (e.is_regular_file()) artifacts.insert(fs::relative(e.path(), cfg_.out_dir).generic_string());
    man["artifacts"] = artifacts;
    write_text(path("manifest.json"), man.dump(1) + "\n");
    return man;
  }

  void log(const std::string& msg) const {
    if (log_) log_(msg);
  }

 private:
  fs::path path(const fs::path& rel) const { return cfg_.out_dir / rel; }

  static std::string key_of(const nlohmann::json& j) { return hex64(fnv1a(j.dump())); }

  static nlohmann::json train_json(const TrainConfig& t) {
    return {{"epochs", t.epochs}, {"lr", t.lr}, {"batch", t.batch}};
  }

  nlohmann::json data_json() const {
    return {{"subset_train", cfg_.subset_train}, {"subset_test", cfg_.subset_test}, {"seed", cfg_.seed}};
  }

  TrainConfig ae_train_config() const {
    TrainConfig tc = cfg_.autoencoder;
    tc.seed = autoencoder_seed();
    tc.k_fraction = cfg_.k_fraction;
    return tc;
  }

  /// Runs `body` unless stages/<id>.json already records success under `key`
  /// with all outputs present. Failures are recorded before rethrowing.
  template <typename Body>
  nlohmann::json run_stage(const std::string& id, const std::string& key, Body&& body) {
    const auto record_path = path("stages/" + id + ".json");
    if (fs::exists(record_path)) {
      const auto rec = nlohmann::json::parse(read_text(record_path));
      bool ok = rec.value("status", "") == "done" && rec.value("key", "") == key;
      for (const auto& o : rec.value("outputs", nlohmann::json::array())) ok = ok && fs::exists(path(o.get<std::string>()));
      if (ok) return rec.value("info", nlohmann::json::object());
    }
    log("stage " + id + " ...");
    const auto t0 = std::chrono::steady_clock::now();
    auto seconds = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
    std::vector<fs::path> outputs;
    nlohmann::json rec{{"stage", id}, {"key", key}};
    try {
      const nlohmann::json info = body(outputs);
      rec["status"] = "done";
      rec["info"] = info;
    } catch (const std::exception& e) {
      rec["status"] = "failed";
      rec["error"] = e.what();
      rec["wall_seconds"] = seconds();
      rec["outputs"] = nlohmann::json::array();
      write_text(record_path, rec.dump(1) + "\n");
      throw;
    }
    rec["wall_seconds"] = seconds();
    rec["outputs"] = nlohmann::json::array();
    for (const auto& o : outputs) rec["outputs"].push_back(o.generic_string());
    write_text(record_path, rec.dump(1) + "\n");
    log("stage " + id + " done in " + fmt_fixed(rec["wall_seconds"].get<double>(), 1) + " s");
    return rec["info"];
  }

  RunConfig cfg_;
  ProgressFn log_;
  std::optional<LabeledDataset> train_, test_;
};

// ---- Experiments -------------------------------------------------------------

namespace detail {

template <typename Fn>
void with_manifest_on_failure(Pipeline& p, Fn&& fn) {
  try {
    fn();
  } catch (...) {
    p.write_manifest();
    throw;
  }
}

inline void add_scored(Pipeline& p, ExperimentResult& res, const MethodSpec& m) {
  res.curves[m.name] = p.method_autoencoder(m);
  res.cards.push_back(p.score(m));
}

}  // namespace detail

/// LIME at each sample count, in the given order.
inline ExperimentResult run_lime_sweep(Pipeline& p, const std::vector<std::size_t>& n_samples_list) {
  require(!n_samples_list.empty(), ErrorKind::NoMethodsConfigured, "no LIME sample counts given");
  ExperimentResult res{"lime_sweep"};
  detail::with_manifest_on_failure(p, [&] {
    for (auto n : n_samples_list) detail::add_scored(p, res, make_method(MethodKind::lime, n));
    bool increasing = true;
    auto dl = nlohmann::json::array();
    for (std::size_t i = 0; i < res.cards.size(); ++i) {
      dl.push_back(res.cards[i].dl);
      if (i && !(res.cards[i].dl > res.cards[i - 1].dl)) increasing = false;
    }
    res.summary = {{"n_samples", n_samples_list}, {"dl", dl}, {"dl_strictly_increasing", increasing}};
    p.publish(res);
  });
  return res;
}

inline ExperimentResult run_method_comparison(Pipeline& p, const std::vector<MethodSpec>& methods) {
  require(!methods.empty(), ErrorKind::NoMethodsConfigured, "no methods configured for the comparison");
  ExperimentResult res{"method_comparison"};
  detail::with_manifest_on_failure(p, [&] {
    for (const auto& m : methods) detail::add_scored(p, res, m);
    auto ranking = res.cards;
    std::stable_sort(ranking.begin(), ranking.end(), [](const ScoreCard& a, const ScoreCard& b) { return a.s_em > b.s_em; });
    auto order = nlohmann::json::array();
    for (const auto& c : ranking) order.push_back(c.method);
    res.summary = {{"ranking_by_s_em", order}};
    for (std::size_t i = 0; i < methods.size(); ++i)
      if (methods[i].kind == MethodKind::random && methods[i].smooth_n == 0) {
        double min_other = INFINITY;
        for (std::size_t j = 0; j < res.cards.size(); ++j)
          if (j != i) min_other = std::min(min_other, res.cards[j].s_em);
        res.summary["random_s_em"] = res.cards[i].s_em;
        res.summary["random_lowest"] = res.cards.size() == 1 || min_other > res.cards[i].s_em;
      }
    p.publish(res);
  });
  return res;
}

/// Each base method next to its SmoothGrad variant, with the score deltas.
inline ExperimentResult run_smoothgrad_study(Pipeline& p, const std::vector<MethodKind>& bases) {
  require(!bases.empty(), ErrorKind::NoMethodsConfigured, "no SmoothGrad base methods configured");
  ExperimentResult res{"smoothgrad_study"};
  detail::with_manifest_on_failure(p, [&] {
    auto pairs = nlohmann::json::array();
    std::string csv = "base,smoothed,dDL,dVP,dS_EM\n";
    for (auto kind : bases) {
      const auto base = make_method(kind);
      const auto smooth = make_method(kind, 0, p.config().smooth_n, p.config().smooth_sigma);
      detail::add_scored(p, res, base);
      detail::add_scored(p, res, smooth);
      const auto& a = res.cards[res.cards.size() - 2];
      const auto& b = res.cards.back();
      pairs.push_back({{"base", a.method},
                       {"smoothed", b.method},
                       {"d_dl", b.dl - a.dl},
                       {"d_vp", b.vp - a.vp},
                       {"d_s_em", b.s_em - a.s_em}});
      csv += a.method + "," + b.method + "," + fmt_fixed(b.dl - a.dl) + "," + fmt_fixed(b.vp - a.vp) + "," +
             fmt_fixed(b.s_em - a.s_em) + "\n";
    }
    res.summary = {{"pairs", pairs}};
    write_text(p.run_dir() / "reports" / res.name / "deltas.csv", csv);
    p.publish(res);
  });
  return res;
}

/// Every scored method in the run directory, in name order, as one report.
inline ExperimentResult collect_scores(Pipeline& p, const std::string& name = "all") {
  ExperimentResult res{name};
  std::vector<fs::path> files;
  if (fs::exists(p.run_dir() / "scores"))
    for (const auto& e : fs::directory_iterator(p.run_dir() / "scores"))
      if (e.path().extension() == ".json") files.push_back(e.path());
  require(!files.empty(), ErrorKind::NoMethodsConfigured, "no scored methods under " + p.run_dir().string());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const auto card = score_card_from_json(nlohmann::json::parse(read_text(f)).at("card"));
    const auto curve = p.run_dir() / "curves" / (card.method + ".json");
    if (fs::exists(curve)) res.curves[card.method] = curve_from_json(nlohmann::json::parse(read_text(curve)));
    res.cards.push_back(card);
  }
  p.publish(res);
  return res;
}

}  // namespace saleval
