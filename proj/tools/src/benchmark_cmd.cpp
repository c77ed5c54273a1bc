#include <algorithm>
#include <atomic>
#include <map>
#include <mutex>
#include <thread>

#include "cngp/cli/commands.hpp"
#include "cngp/cli/table.hpp"
#include "cngp/data.hpp"
#include "cngp/metrics.hpp"
#include "cngp/rng.hpp"
#include "common.hpp"

namespace cngp::cli {

using detail::fmt;

namespace {

struct Task {
  int scenario = 1;
  int rep = 0;
};

struct Measurement {
  std::string model;
  std::string metric;
  double value = 0.0;
};

struct TaskOutcome {
  std::vector<Measurement> measurements;
  std::vector<std::pair<std::string, std::string>> failures; ///< (model, message)
};

TaskOutcome run_task(const Task &task, const std::vector<NoiseFamily> &models, TrainConfig train,
                     Eigen::Index n_train, Eigen::Index n_test, std::uint64_t seed) {
  const FriedmanScenario sc = friedman_scenario(task.scenario);
  const std::uint64_t task_seed =
      Rng(seed, Stream::Benchmark,
          static_cast<std::uint64_t>(task.scenario) * 100000u + static_cast<std::uint64_t>(task.rep))
          .next();
  Dataset tr = simulate_friedman(n_train, sc.p_outlier, sc.sigma_outlier, task_seed, false, 0);
  Dataset te = simulate_friedman(n_test, sc.p_outlier, sc.sigma_outlier, task_seed, true, 1);
  const Standardizer st = fit_standardizer(tr);
  const Eigen::MatrixXd x = st.apply(tr.features);
  const Eigen::MatrixXd xt = st.apply(te.features);
  const std::vector<double> y(te.target.data(), te.target.data() + te.rows());
  train.seed = task_seed;

  TaskOutcome out;
  for (const NoiseFamily family : models) {
    const std::string name(to_string(family));
    try {
      const FitResult fitted = fit(x, tr.target, family, train);
      const auto preds = predict(fitted.model, xt, {train.mc_samples, task_seed, train.jitter});
      std::vector<double> mean;
      mean.reserve(preds.size());
      for (const auto &p : preds) {
        mean.push_back(predictive_mean(p));
      }
      out.measurements.push_back({name, "nlpd", nlpd(preds, y)});
      out.measurements.push_back({name, "rmse", rmse(y, mean)});
      out.measurements.push_back({name, "mae", mae(y, mean)});
    } catch (const Error &e) {
      out.failures.emplace_back(name, e.what());
    }
  }
  return out;
}

double median_of(std::vector<double> v) { return empirical_quantile(std::move(v), 0.5); }

} // namespace

std::vector<std::filesystem::path> cmd_benchmark(const RunConfig &config) {
  std::vector<int> scenarios;
  for (const double s : config.get_real_list("scenarios")) {
    if (s != std::floor(s) || s < 1 || s > 4) {
      throw ConfigError("scenarios must be integers in 1..4");
    }
    scenarios.push_back(static_cast<int>(s));
  }
  std::vector<NoiseFamily> models;
  try {
    for (const auto &m : config.get_list("models")) {
      models.push_back(parse_noise_family(m));
    }
  } catch (const InvalidArgument &e) {
    throw ConfigError(e.what());
  }
  const auto reps = config.get_int("reps");
  const auto n_train = config.get_int("n_train");
  const auto n_test = config.get_int("n_test");
  const auto threads = config.get_int("threads");
  if (scenarios.empty() || models.empty() || reps < 1 || n_test < 1 || threads < 1) {
    throw ConfigError("benchmark needs scenarios, models, reps >= 1, n_test >= 1 and threads >= 1");
  }
  const TrainConfig train = train_config_from(config);
  if (n_train < train.inducing_count || n_train < train.batch_size) {
    throw ConfigError("n_train must be at least inducing_count and batch_size");
  }
  const auto seed = static_cast<std::uint64_t>(config.get_int("seed"));
  const auto dir = detail::prepare_output_dir(config);

  std::vector<Task> tasks;
  for (const int s : scenarios) {
    for (int r = 0; r < reps; ++r) {
      tasks.push_back({s, r});
    }
  }
  std::vector<TaskOutcome> outcomes(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < tasks.size(); k = next++) {
      outcomes[k] = run_task(tasks[k], models, train, n_train, n_test, seed);
    }
  };
  const auto pool_size = std::min<std::size_t>(static_cast<std::size_t>(threads), tasks.size());
  if (pool_size <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < pool_size; ++t) {
      pool.emplace_back(worker);
    }
    for (auto &th : pool) {
      th.join();
    }
  }

  CsvWriter results({"scenario", "p_outlier", "sigma_outlier", "rep", "model", "metric", "value"});
  std::map<std::tuple<int, std::string, std::string>, std::vector<double>> groups;
  std::vector<std::pair<std::string, std::string>> entries;
  std::size_t failed = 0;
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    const FriedmanScenario sc = friedman_scenario(tasks[k].scenario);
    for (const auto &m : outcomes[k].measurements) {
      results.add({std::to_string(tasks[k].scenario), fmt(sc.p_outlier), fmt(sc.sigma_outlier),
                   std::to_string(tasks[k].rep), m.model, m.metric, fmt(m.value)});
      groups[{tasks[k].scenario, m.model, m.metric}].push_back(m.value);
    }
    for (const auto &[model, message] : outcomes[k].failures) {
      ++failed;
      entries.emplace_back("failed.scenario" + std::to_string(tasks[k].scenario) + ".rep" +
                               std::to_string(tasks[k].rep) + "." + model,
                           message);
    }
  }
  CsvWriter summary({"scenario", "model", "metric", "median", "reps"});
  for (const auto &[key, values] : groups) {
    summary.add({std::to_string(std::get<0>(key)), std::get<1>(key), std::get<2>(key),
                 fmt(median_of(values)), std::to_string(values.size())});
  }
  const auto results_path = dir / "benchmark_results.csv";
  const auto summary_path = dir / "benchmark_summary.csv";
  results.save(results_path);
  summary.save(summary_path);
  entries.insert(entries.begin(), {{"tasks", std::to_string(tasks.size())},
                                   {"failed_fits", std::to_string(failed)}});
  const auto manifest = detail::write_manifest(config, entries);
  if (failed > 0) {
    throw NonFiniteObjective("benchmark: " + std::to_string(failed) +
                             " fits failed; partial results written to " + dir.string());
  }
  return {results_path, summary_path, manifest};
}

} // namespace cngp::cli
