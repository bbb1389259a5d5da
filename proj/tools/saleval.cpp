// saleval: train, explain and score saliency methods from the command line.
//
// Exit codes: 0 success, 1 configuration error, 2 stage failure.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "saleval/pipeline.hpp"

using namespace saleval;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitStage = 2;

struct Options {
  std::string config_path;
  std::string profile;
  std::string data_dir;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> subset_train, subset_test;
  bool quiet = false;

  // Method selection for the single-method subcommands.
  std::string method;
  std::optional<std::size_t> n_samples, steps;
  std::optional<double> sigma;
  std::vector<std::size_t> sweep;
};

RunConfig build_config(const Options& o) {
  RunConfig cfg = o.config_path.empty() ? RunConfig::profile_named(o.profile.empty() ? "desk" : o.profile)
                                        : load_run_config(o.config_path);
  if (!o.config_path.empty() && !o.profile.empty())
    fail(ErrorKind::ConfigError, "--profile and --config are mutually exclusive");
  if (const char* env = std::getenv("SALEVAL_DATA_DIR"); env && *env) cfg.data_dir = env;
  if (!o.data_dir.empty()) cfg.data_dir = o.data_dir;
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  if (o.seed) cfg.seed = *o.seed;
  if (o.subset_train) cfg.subset_train = *o.subset_train;
  if (o.subset_test) cfg.subset_test = *o.subset_test;
  require(!cfg.data_dir.empty(), ErrorKind::ConfigError, "no data directory: pass --data-dir or set SALEVAL_DATA_DIR");
  cfg.validate();
  return cfg;
}

/// A configured method by name, or a method id with the given flags.
MethodSpec resolve_method(const Options& o, const RunConfig& cfg) {
  require(!o.method.empty(), ErrorKind::ConfigError, "--method is required");
  const bool flags = o.n_samples || o.steps || o.sigma;
  for (const auto& m : cfg.methods)
    if (m.name == o.method && !flags) return m;
  MethodSpec m = make_method(method_kind_from_string(o.method), o.n_samples.value_or(0),
                             o.sigma ? cfg.smooth_n : 0, o.sigma.value_or(cfg.smooth_sigma));
  if (o.steps) m.steps = *o.steps;
  require(m.steps >= 1 && m.smooth_sigma >= 0.0, ErrorKind::ConfigError, "bad method flags");
  return m;
}

void print_cards(const std::vector<ScoreCard>& cards) {
  std::printf("%-28s %7s %7s %7s %7s %7s %7s %7s %7s\n", "method", "TA", "SC", "PC", "DL", "dSC", "dFID", "VP",
              "S_EM");
  for (const auto& c : cards)
    std::printf("%-28s %7.3f %7.3f %7.3f %7.3f %7.3f %7.3f %7.3f %7.3f%s\n", c.method.c_str(), c.ta_mean, c.sc_mean,
                c.pc_mean, c.dl, c.dsc, c.dfid, c.vp, c.s_em, c.degenerate ? "  (degenerate)" : "");
}

void print_result(const Pipeline& p, const ExperimentResult& res) {
  print_cards(res.cards);
  std::printf("report: %s\n", (p.run_dir() / "reports" / res.name).string().c_str());
}

int fail_with(int code, const std::string& msg) {
  std::cerr << "saleval: " << msg << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evaluate saliency-map methods by learnability and variance proximity on MNIST."};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config_path, "Run configuration (JSON)")->check(CLI::ExistingFile);
  app.add_option("--profile", o.profile, "Built-in profile when no --config is given")
      ->check(CLI::IsMember({"desk", "full"}));
  app.add_option("--data-dir", o.data_dir, "MNIST IDX directory (overrides SALEVAL_DATA_DIR)");
  app.add_option("--out", o.out_dir, "Run directory");
  app.add_option("--seed", o.seed, "Master seed");
  app.add_option("--subset-train", o.subset_train, "Training images to use (0 = all)");
  app.add_option("--subset-test", o.subset_test, "Test images to use (0 = all)");
  app.add_flag("-q,--quiet", o.quiet, "Suppress progress messages");

  auto method_options = [&o](CLI::App* sub) {
    sub->add_option("--method", o.method, "Configured method name or method id")->required();
    sub->add_option("--n-samples", o.n_samples, "Perturbation samples (LIME, KernelSHAP)");
    sub->add_option("--sigma", o.sigma, "Wrap in SmoothGrad with this relative noise level");
    sub->add_option("--steps", o.steps, "Integrated-gradients steps");
  };

  auto* train_clf = app.add_subcommand("train-classifier", "Train the MNIST classifier");
  auto* train_ref = app.add_subcommand("train-ae-ref", "Train AE_i, the image-reconstruction autoencoder");
  auto* explain = app.add_subcommand("explain", "Generate explanations for both splits");
  method_options(explain);
  auto* train_method = app.add_subcommand("train-ae-method", "Train AE_F for one method");
  method_options(train_method);
  auto* score = app.add_subcommand("score", "Score one method (DL, VP, S_EM)");
  method_options(score);
  auto* sweep = app.add_subcommand("sweep-lime", "LIME at several sample counts");
  sweep->add_option("--n-samples", o.sweep, "Sample counts (default from config)");
  auto* compare = app.add_subcommand("compare-methods", "Score every configured method");
  auto* smooth = app.add_subcommand("smoothgrad-study", "Base methods against their SmoothGrad variants");
  smooth->add_option("--sigma", o.sigma, "Relative noise level (default from config)");
  auto* report = app.add_subcommand("report", "Collect every scored method in the run into reports/all");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  std::optional<Pipeline> pipeline;
  try {
    RunConfig cfg = build_config(o);
    if (*smooth && o.sigma) cfg.smooth_sigma = *o.sigma;
    if (*sweep && !o.sweep.empty()) cfg.lime_samples = o.sweep;
    cfg.validate();
    ProgressFn log;
    if (!o.quiet) log = [](const std::string& msg) { std::cerr << msg << std::endl; };
    pipeline.emplace(std::move(cfg), log);
  } catch (const Error& e) {
    return fail_with(kExitConfig, e.what());
  } catch (const std::exception& e) {
    return fail_with(kExitConfig, e.what());
  }

  Pipeline& p = *pipeline;
  const RunConfig& cfg = p.config();
  try {
    if (*train_clf) {
      nlohmann::json info;
      p.classifier(&info);
      std::printf("classifier test accuracy %.4f\n", info.value("test_accuracy", 0.0));
    } else if (*train_ref) {
      MetricCurve curve;
      p.ae_ref(&curve);
      std::printf("AE_i test L1 %.5f SSIM %.4f\n", curve.back().test.l1, curve.back().test.ssim);
    } else if (*explain) {
      const auto m = resolve_method(o, cfg);
      p.explanations(m);
      std::printf("explanations: %s, %s\n", (p.run_dir() / Pipeline::explanation_file(m, Split::train)).string().c_str(),
                  (p.run_dir() / Pipeline::explanation_file(m, Split::test)).string().c_str());
    } else if (*train_method) {
      const auto m = resolve_method(o, cfg);
      const auto curve = p.method_autoencoder(m);
      const auto& t = curve.back().test;
      std::printf("%s AE_F final test TA %.4f SC %.4f PC %.4f L1 %.5f\n", m.name.c_str(), t.ta, t.sc, t.pc, t.l1);
    } else if (*score) {
      print_cards({p.score(resolve_method(o, cfg))});
    } else if (*sweep) {
      print_result(p, run_lime_sweep(p, cfg.lime_samples));
    } else if (*compare) {
      print_result(p, run_method_comparison(p, cfg.methods));
    } else if (*smooth) {
      const auto res = run_smoothgrad_study(p, cfg.smooth_bases);
      print_result(p, res);
      for (const auto& pair : res.summary.at("pairs"))
        std::printf("%s -> %s: dDL %+.3f dVP %+.3f dS_EM %+.3f\n", pair.at("base").get<std::string>().c_str(),
                    pair.at("smoothed").get<std::string>().c_str(), pair.at("d_dl").get<double>(),
                    pair.at("d_vp").get<double>(), pair.at("d_s_em").get<double>());
    } else if (*report) {
      print_result(p, collect_scores(p));
    }
    p.write_manifest();
  } catch (const Error& e) {
    const bool config = e.kind() == ErrorKind::ConfigError || e.kind() == ErrorKind::NoMethodsConfigured;
    return fail_with(config ? kExitConfig : kExitStage, e.what());
  } catch (const std::exception& e) {
    return fail_with(kExitStage, e.what());
  }
  return 0;
}
