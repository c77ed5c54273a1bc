#include "cngp/cli/commands.hpp"
#include "cngp/data.hpp"
#include "common.hpp"

namespace cngp::cli {

using detail::fmt;

std::vector<std::filesystem::path> cmd_simulate(const RunConfig &config) {
  const std::string generator = config.get_string("generator");
  if (generator != "sim1" && generator != "friedman") {
    throw ConfigError("generator must be sim1 or friedman");
  }
  const auto seed = static_cast<std::uint64_t>(config.get_int("seed"));
  const std::int64_t sizes[3] = {config.get_int("n_train"), config.get_int("n_validation"),
                                 config.get_int("n_test")};
  if (sizes[0] < 1 || sizes[1] < 0 || sizes[2] < 0) {
    throw ConfigError("n_train must be positive and n_validation, n_test nonnegative");
  }
  const bool noise_free_test = config.get_bool("noise_free_test");
  ContaminatedNormal theta{config.get_real("outlier_prob"), config.get_real("inflation"),
                           config.get_real("noise_var")};
  FriedmanScenario scenario{config.get_real("p_outlier"), config.get_real("sigma_outlier")};
  const auto scenario_index = config.get_int("scenario");
  if (scenario_index != 0) {
    scenario = friedman_scenario(static_cast<int>(scenario_index));
  }
  const auto dir = detail::prepare_output_dir(config);

  std::vector<std::pair<std::string, std::string>> entries{{"generator", generator}};
  if (generator == "sim1") {
    entries.insert(entries.end(), {{"outlier_prob", fmt(theta.outlier_prob)},
                                   {"inflation", fmt(theta.inflation)},
                                   {"noise_var", fmt(theta.noise_var)}});
  } else {
    entries.insert(entries.end(), {{"p_outlier", fmt(scenario.p_outlier)},
                                   {"sigma_outlier", fmt(scenario.sigma_outlier)}});
  }

  detail::Paths written;
  const char *names[3] = {"train", "validation", "test"};
  for (int part = 0; part < 3; ++part) {
    if (sizes[part] == 0) {
      continue;
    }
    const bool clean = part == 2 && noise_free_test;
    const auto stream = static_cast<std::uint64_t>(part);
    Dataset ds;
    if (generator == "sim1") {
      ds = simulate_sim1(sizes[part], theta, seed, stream);
      if (clean) {
        ds.target = ds.extra.at("f");
        ds.extra.at("outlier").setZero();
      }
    } else {
      ds = simulate_friedman(sizes[part], scenario.p_outlier, scenario.sigma_outlier, seed, clean,
                             stream);
    }
    const auto path = dir / (std::string(names[part]) + ".csv");
    save_csv(path, ds);
    written.push_back(path);
    entries.emplace_back(std::string(names[part]) + ".rows", std::to_string(ds.rows()));
    entries.emplace_back(std::string(names[part]) + ".outliers",
                         std::to_string(static_cast<long>(ds.extra.at("outlier").sum())));
    entries.emplace_back(std::string(names[part]) + ".noise_free", clean ? "true" : "false");
  }
  entries.emplace_back("outlier_mask", "column 'outlier' of each file");
  written.push_back(detail::write_manifest(config, entries));
  return written;
}

} // namespace cngp::cli
