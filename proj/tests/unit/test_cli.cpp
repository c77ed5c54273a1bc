#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cngp/cli/artifact.hpp"
#include "cngp/cli/commands.hpp"
#include "cngp/cli/table.hpp"
#include "cngp/metrics.hpp"
#include "cngp/oracle.hpp"

namespace cngp::cli {
namespace {

namespace fs = std::filesystem;

class Cli : public ::testing::Test {
protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("cngp_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(std::vector<std::string> args) {
    args.insert(args.begin(), "cngp");
    std::vector<const char *> argv;
    for (const auto &a : args) {
      argv.push_back(a.c_str());
    }
    out_.str("");
    err_.str("");
    return run_cli(static_cast<int>(argv.size()), argv.data(), out_, err_);
  }

  fs::path path(const std::string &name) const { return dir_ / name; }
  std::string set(const std::string &key, const fs::path &p) const { return key + "=" + p.string(); }

  // Small sim1 data split into train.csv / validation.csv / test.csv under `sub`.
  void simulate(const std::string &sub, int n_train = 150) {
    ASSERT_EQ(run({"simulate", "-s", set("output_dir", path(sub)), "-s", "n_train=" + std::to_string(n_train),
                   "-s", "n_validation=40", "-s", "n_test=60", "-s", "seed=3"}),
              0)
        << err_.str();
  }

  std::vector<std::string> quick_train(const std::string &sub, const std::string &noise = "cn") {
    return {"train",        "-s", set("train_path", path("sim/train.csv")),
            "-s",           set("validation_path", path("sim/validation.csv")),
            "-s",           set("output_dir", path(sub)),
            "-s",           "noise=" + noise,
            "-s",           "epochs=3",
            "-s",           "batch_size=50",
            "-s",           "inducing_count=10",
            "-s",           "restarts=2",
            "-s",           "mc_samples=50",
            "-s",           "seed=5"};
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Manifest lines after the resolved configuration, which names output_dir.
std::string results_of(const fs::path &manifest) {
  const std::string text = slurp(manifest);
  return text.substr(text.find("[results]"));
}

Dataset load_sim(const fs::path &p) {
  CsvLoadOptions opts;
  opts.optional_carry_columns = {"f", "outlier"};
  return load_csv(p, opts).dataset;
}

void spit(const fs::path &p, const std::string &text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

TEST_F(Cli, ConfigErrorsExitWithTwo) {
  EXPECT_EQ(run({"simulate", "-s", "no_such_key=1"}), kExitConfig);
  EXPECT_NE(err_.str().find("no_such_key"), std::string::npos);
  EXPECT_EQ(run({"simulate", "-s", "n_train=many"}), kExitConfig);
  EXPECT_EQ(run({"frobnicate"}), kExitConfig);
  EXPECT_EQ(run({"train", "-s", set("train_path", path("absent.csv"))}), kExitConfig);
  EXPECT_EQ(run({"train"}), kExitConfig);
  spit(path("bad.cfg"), "epochs = 3\nbogus = 4\n");
  EXPECT_EQ(run({"train", "-c", path("bad.cfg").string()}), kExitConfig);
  EXPECT_NE(err_.str().find(":2:"), std::string::npos);
  EXPECT_EQ(run({"simulate", "-c", path("missing.cfg").string()}), kExitConfig);
}

TEST_F(Cli, ExitCodeMapping) {
  EXPECT_EQ(exit_code_for(ConfigError("x")), 2);
  EXPECT_EQ(exit_code_for(InvalidArgument("x")), 2);
  EXPECT_EQ(exit_code_for(MissingColumn("x")), 3);
  EXPECT_EQ(exit_code_for(FeatureMismatch("x")), 3);
  EXPECT_EQ(exit_code_for(NotPositiveDefinite("x")), 4);
  EXPECT_EQ(exit_code_for(NonFiniteObjective("x")), 4);
  EXPECT_EQ(exit_code_for(std::runtime_error("x")), 1);
}

TEST_F(Cli, ConfigFileAndOverrides) {
  auto c = make_config("train");
  c.merge_text("# comment\nepochs = 7   # trailing\nnoise = gaussian\n");
  c.set("epochs=9");
  EXPECT_EQ(c.get_int("epochs"), 9);
  EXPECT_EQ(c.get_string("noise"), "gaussian");
  EXPECT_NE(c.echo().find("epochs = 9\n"), std::string::npos);
  EXPECT_THROW(c.set("closed_form_theta=maybe"), ConfigError);
  EXPECT_THROW(c.get_int("unknown"), ConfigError);
}

TEST_F(Cli, SimulateDefaultsAndManifest) {
  const auto c = make_config("simulate");
  EXPECT_EQ(c.get_real("outlier_prob"), 0.1);
  EXPECT_EQ(c.get_real("inflation"), 10.0);
  EXPECT_EQ(c.get_real("noise_var"), 1.0);
  EXPECT_EQ(make_config("train").get_int("restarts"), 5);
  EXPECT_EQ(make_config("predict").get_real("level"), 0.95);

  ASSERT_EQ(run({"simulate", "-s", set("output_dir", path("f")), "-s", "generator=friedman", "-s", "scenario=4",
                 "-s", "n_train=100", "-s", "n_test=20"}),
            0);
  const std::string manifest = slurp(path("f/simulate_manifest.txt"));
  EXPECT_NE(manifest.find("p_outlier = 0.3\n"), std::string::npos);
  EXPECT_NE(manifest.find("sigma_outlier = 10\n"), std::string::npos);
  EXPECT_NE(manifest.find("train.outliers = 30\n"), std::string::npos);
  EXPECT_NE(manifest.find("seed = 0\n"), std::string::npos);
  const Table test = read_table(path("f/test.csv"));
  EXPECT_EQ(test.numeric("y"), test.numeric("f"));
}

TEST_F(Cli, SimulateIsIdempotent) {
  simulate("a");
  simulate("b");
  for (const auto *name : {"train.csv", "validation.csv", "test.csv"}) {
    EXPECT_EQ(slurp(path(std::string("a/") + name)), slurp(path(std::string("b/") + name)));
  }
  ASSERT_EQ(run({"simulate", "-s", set("output_dir", path("c")), "-s", "n_train=150", "-s", "n_validation=40",
                 "-s", "n_test=60", "-s", "seed=4"}),
            0);
  EXPECT_NE(slurp(path("a/train.csv")), slurp(path("c/train.csv")));
}

TEST_F(Cli, TrainPredictRoundTrip) {
  simulate("sim");
  ASSERT_EQ(run(quick_train("run")), 0) << err_.str();
  const ModelArtifact artifact = load_artifact(path("run/model.json"));
  EXPECT_EQ(artifact.feature_names, std::vector<std::string>{"x"});
  EXPECT_EQ(artifact.training.restarts, 2);
  ASSERT_TRUE(artifact.standardizer.has_value());
  EXPECT_EQ(artifact_to_json(artifact_from_json(slurp(path("run/model.json")))), slurp(path("run/model.json")));

  const Table trace = read_table(path("run/trace.csv"));
  EXPECT_EQ(trace.rows.size(), 2u * 4u);
  for (const auto &col : {"epoch", "elbo", "outlier_prob", "inflation", "noise_var", "validation_nlpd"}) {
    EXPECT_TRUE(trace.find(col).has_value()) << col;
  }

  ASSERT_EQ(run({"predict", "-s", set("model_path", path("run/model.json")), "-s",
                 set("data_path", path("sim/train.csv")), "-s", set("output_dir", path("pred"))}),
            0)
      << err_.str();
  const Table pred = read_table(path("pred/predictions.csv"));
  for (const auto &col : {"mean", "sd", "lo", "hi", "level", "target", "nlpd", "f", "outlier"}) {
    EXPECT_TRUE(pred.find(col).has_value()) << col;
  }

  // In-process prediction on the same rows from the in-memory artifact.
  const Dataset train = load_sim(path("sim/train.csv"));
  PredictOptions opts;
  opts.mc_samples = 1000;
  opts.seed = 0;
  const auto preds = predict_raw(artifact, train.features, opts);
  const auto means = pred.numeric("mean");
  const auto sds = pred.numeric("sd");
  const auto los = pred.numeric("lo");
  const auto nl = pred.numeric("nlpd");
  ASSERT_EQ(means.size(), preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    EXPECT_EQ(means[i], predictive_mean(preds[i]));
    EXPECT_EQ(sds[i], std::sqrt(predictive_variance(preds[i])));
    EXPECT_EQ(los[i], predictive_interval(preds[i], 0.95).lo);
    EXPECT_EQ(nl[i], predictive_nlpd(preds[i], train.target(static_cast<Eigen::Index>(i))));
  }
}

TEST_F(Cli, TrainingIsBitwiseReproducible) {
  simulate("sim");
  for (const auto *noise : {"cn", "student_t"}) {
    ASSERT_EQ(run(quick_train("a", noise)), 0) << err_.str();
    ASSERT_EQ(run(quick_train("b", noise)), 0);
    EXPECT_EQ(slurp(path("a/model.json")), slurp(path("b/model.json")));
    EXPECT_EQ(slurp(path("a/trace.csv")), slurp(path("b/trace.csv")));
    EXPECT_EQ(results_of(path("a/train_manifest.txt")), results_of(path("b/train_manifest.txt")));
    for (const auto *sub : {"pa", "pb"}) {
      ASSERT_EQ(run({"predict", "-s", set("model_path", path("a/model.json")), "-s",
                     set("data_path", path("sim/test.csv")), "-s", set("output_dir", path(sub)), "-s",
                     "mc_samples=100"}),
                0);
    }
    EXPECT_EQ(slurp(path("pa/predictions.csv")), slurp(path("pb/predictions.csv")));
  }
}

TEST_F(Cli, SampledPredictionsSurviveArtifactReload) {
  simulate("sim");
  ASSERT_EQ(run(quick_train("run", "laplace")), 0) << err_.str();
  const ModelArtifact a = load_artifact(path("run/model.json"));
  const ModelArtifact b = artifact_from_json(artifact_to_json(a));
  const Dataset test = load_sim(path("sim/test.csv"));
  PredictOptions opts;
  opts.mc_samples = 64;
  opts.seed = 9;
  const auto pa = predict_raw(a, test.features, opts);
  const auto pb = predict_raw(b, test.features, opts);
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(std::get<SampledPred>(pa[i]).latent_samples, std::get<SampledPred>(pb[i]).latent_samples);
  }
}

TEST_F(Cli, PredictReportsMissingFeatures) {
  simulate("sim");
  ASSERT_EQ(run(quick_train("run", "gaussian")), 0);
  spit(path("nofeat.csv"), "z,y\n1,2\n3,4\n");
  EXPECT_EQ(run({"predict", "-s", set("model_path", path("run/model.json")), "-s",
                 set("data_path", path("nofeat.csv")), "-s", set("output_dir", path("p"))}),
            kExitData);
  EXPECT_NE(err_.str().find("missing feature columns: x"), std::string::npos);
  const ModelArtifact artifact = load_artifact(path("run/model.json"));
  Dataset ds = load_sim(path("sim/test.csv"));
  ds.feature_names = {"x9"};
  EXPECT_THROW(select_features(artifact, ds), FeatureMismatch);
}

TEST_F(Cli, PredictWithoutTargetColumn) {
  simulate("sim");
  ASSERT_EQ(run(quick_train("run", "gaussian")), 0);
  spit(path("x.csv"), "x\n0.5\n2.5\n");
  ASSERT_EQ(run({"predict", "-s", set("model_path", path("run/model.json")), "-s", set("data_path", path("x.csv")),
                 "-s", set("output_dir", path("p"))}),
            0)
      << err_.str();
  const Table t = read_table(path("p/predictions.csv"));
  EXPECT_EQ(t.rows.size(), 2u);
  EXPECT_FALSE(t.find("nlpd").has_value());
}

TEST_F(Cli, GaussianWithInducingAtDataMatchesExactPosterior) {
  ASSERT_EQ(run({"simulate", "-s", set("output_dir", path("sim")), "-s", "n_train=50", "-s", "n_test=0", "-s",
                 "seed=8"}),
            0);
  ASSERT_EQ(run({"train", "-s", set("train_path", path("sim/train.csv")), "-s", set("output_dir", path("run")), "-s",
                 "noise=gaussian", "-s", "epochs=3000", "-s", "batch_size=50", "-s", "inducing_count=50", "-s",
                 "optimize_inducing=false", "-s", "lr_phi=0.02", "-s", "lr_theta=1e-9", "-s", "lr_decay=0.999", "-s",
                 "restarts=1", "-s", "early_stop_patience=0"}),
            0)
      << err_.str();
  const ModelArtifact artifact = load_artifact(path("run/model.json"));
  const Dataset train = load_sim(path("sim/train.csv"));
  const Eigen::MatrixXd x = artifact.standardizer->apply(train.features);
  const double s2 = std::get<GaussianNoise>(artifact.model.noise).noise_var;
  const ExactGP gp(x, train.target, artifact.model.kernel, s2);
  const auto post = gp.posterior(x);
  const auto q = latent_marginals(artifact.model.variational, artifact.model.kernel, x);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    EXPECT_NEAR(q[static_cast<std::size_t>(i)].mean, post.mean(i), 1e-3);
    EXPECT_NEAR(q[static_cast<std::size_t>(i)].var, post.latent_var(i), 1e-3);
  }
}

TEST_F(Cli, EvaluateMatchesLibraryMetrics) {
  // Hand-built predictions: five rows, two flagged.
  spit(path("pred.csv"), "row,split,mean,sd,lo,hi,level,target,nlpd,storm\n"
                         "0,test,1,1,0,2,0.95,1.5,1.0,0\n"
                         "1,test,2,1,1,3,0.95,3.5,2.0,1\n"
                         "2,test,3,1,2,4,0.95,3,0.5,0\n"
                         "3,test,4,1,2,7,0.95,6,1.5,1\n"
                         "4,train,0,1,-1,1,0.95,9,9.0,0\n");
  spit(path("src.csv"), "y,split\n1,train\n2,train\n3,train\n4,train\n100,test\n");
  ASSERT_EQ(run({"evaluate", "-s", set("predictions_path", path("pred.csv")), "-s", "split=test", "-s",
                 set("threshold_source", path("src.csv")), "-s", "threshold_quantiles=0.5", "-s", "thresholds=3.5",
                 "-s", set("output_dir", path("ev"))}),
            0)
      << err_.str();
  const Table m = read_table(path("ev/metrics.csv"));
  auto value = [&](const std::string &subset, const std::string &metric, const std::string &thr = "") {
    for (const auto &r : m.rows) {
      if (r[0] == subset && r[1] == metric && r[2] == thr) {
        return r[3];
      }
    }
    return std::string("<absent>");
  };
  const std::vector<double> y{1.5, 3.5, 3, 6};
  const std::vector<double> mu{1, 2, 3, 4};
  EXPECT_EQ(value("all", "n"), "4");
  EXPECT_EQ(value("all", "rmse"), format_double(rmse(y, mu)));
  EXPECT_EQ(value("all", "mae"), format_double(mae(y, mu)));
  EXPECT_EQ(value("all", "nlpd"), format_double(1.25));
  const auto cov = coverage_and_length(std::vector<Interval>{{0, 2}, {1, 3}, {2, 4}, {2, 7}}, y);
  EXPECT_EQ(value("all", "coverage"), format_double(cov.coverage));
  EXPECT_EQ(value("all", "interval_length_max"), "5");
  // Median of the training rows of src.csv is 2.5.
  const auto s = skill_scores(y, mu, 2.5);
  EXPECT_EQ(value("all", "hss", "2.5"), format_double(*s.hss));
  EXPECT_EQ(value("all", "tss", "2.5"), format_double(*s.tss));
  EXPECT_EQ(value("all", "hits", "3.5"), "1");
  EXPECT_EQ(value("storm=1", "n"), "2");
  EXPECT_EQ(value("storm=1", "mae"), format_double(mae(std::vector<double>{3.5, 6}, std::vector<double>{2, 4})));
  EXPECT_EQ(value("storm=0", "rmse"), format_double(rmse(std::vector<double>{1.5, 3}, std::vector<double>{1, 3})));
  // All storm rows exceed 2.5 and are forecast as such: no negatives, TSS undefined.
  EXPECT_EQ(value("storm=1", "tss", "2.5"), "not_defined");
}

TEST_F(Cli, EvaluatePerfectPredictions) {
  spit(path("pred.csv"), "mean,lo,hi,target\n1,1,1,1\n2,2,2,2\n5,5,5,5\n");
  ASSERT_EQ(run({"evaluate", "-s", set("predictions_path", path("pred.csv")), "-s", set("output_dir", path("ev"))}),
            0)
      << err_.str();
  const std::string text = slurp(path("ev/metrics.csv"));
  EXPECT_NE(text.find("all,rmse,,0\n"), std::string::npos);
  EXPECT_NE(text.find("all,coverage,,1\n"), std::string::npos);
  EXPECT_EQ(text.find("nlpd"), std::string::npos);
}

TEST_F(Cli, EvaluateRejectsIncompleteRows) {
  spit(path("pred.csv"), "mean,lo,hi,target\n1,0,2,1\n2,1,3,\n");
  EXPECT_EQ(run({"evaluate", "-s", set("predictions_path", path("pred.csv")), "-s", set("output_dir", path("ev"))}),
            kExitData);
  EXPECT_EQ(run({"evaluate", "-s", set("predictions_path", path("pred.csv")), "-s", "skill_input=median"}),
            kExitConfig);
}

TEST_F(Cli, FeaturesSubcommand) {
  std::string raw = "timestamp,a,b,y,storm\n";
  const std::int64_t t0 = year_start(2013) + 86400 * 364;
  for (int i = 0; i < 3 * 24 * 60; ++i) {
    const std::int64_t t = t0 + 60LL * i;
    raw += format_iso8601(t) + "," + std::to_string(i % 7) + "," + (i % 11 == 0 ? "" : std::to_string(i % 5)) + "," +
           std::to_string((i * 37) % 101) + "," + (i > 2000 ? "1" : "0") + "\n";
  }
  spit(path("raw.csv"), raw);
  ASSERT_EQ(run({"features", "-s", set("input_path", path("raw.csv")), "-s", "covariates=a,b", "-s",
                 "validation_year=2014", "-s", "test_year=2015", "-s", set("output_dir", path("ft"))}),
            0)
      << err_.str();
  CsvLoadOptions opts;
  opts.optional_carry_columns = {"storm"};
  const Dataset ds = load_csv(path("ft/features.csv"), opts).dataset;
  EXPECT_EQ(ds.cols(), 2 * 12 + 4);
  EXPECT_FALSE(ds.rows_with(SplitLabel::Train).empty());
  EXPECT_FALSE(ds.rows_with(SplitLabel::Validation).empty());
  EXPECT_TRUE(ds.rows_with(SplitLabel::Test).empty());
  EXPECT_EQ(ds.extra.at("storm").maxCoeff(), 1.0);
  EXPECT_EQ(run({"features", "-s", set("input_path", path("raw.csv")), "-s", "covariates=a", "-s",
                 "validation_year=2015", "-s", "test_year=2014"}),
            kExitConfig);
  EXPECT_EQ(run({"features", "-s", set("input_path", path("raw.csv")), "-s", "covariates=zz", "-s",
                 set("output_dir", path("ft2"))}),
            kExitData);
}

TEST_F(Cli, BenchmarkTablesAreReproducible) {
  const std::vector<std::string> args{"benchmark", "-s",          "scenarios=1,4",  "-s",         "reps=2",
                                      "-s",        "n_train=120", "-s",             "n_test=50",  "-s",
                                      "epochs=2",  "-s",          "batch_size=60",  "-s",         "inducing_count=8",
                                      "-s",        "restarts=1",  "-s",             "mc_samples=30"};
  auto a = args;
  a.insert(a.end(), {"-s", set("output_dir", path("a"))});
  auto b = args;
  b.insert(b.end(), {"-s", set("output_dir", path("b")), "-s", "threads=2"});
  ASSERT_EQ(run(a), 0) << err_.str();
  ASSERT_EQ(run(b), 0) << err_.str();
  EXPECT_EQ(slurp(path("a/benchmark_results.csv")), slurp(path("b/benchmark_results.csv")));
  EXPECT_EQ(slurp(path("a/benchmark_summary.csv")), slurp(path("b/benchmark_summary.csv")));
  const Table t = read_table(path("a/benchmark_results.csv"));
  EXPECT_EQ(t.rows.size(), 2u * 2u * 4u * 3u);
}

} // namespace
} // namespace cngp::cli
