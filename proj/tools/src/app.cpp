#include <filesystem>
#include <ostream>

#include <CLI11.hpp>

#include "cngp/cli/commands.hpp"
#include "cngp/cli/table.hpp"
#include "common.hpp"

namespace cngp::cli {

int exit_code_for(const std::exception &error) {
  if (dynamic_cast<const ConfigError *>(&error) != nullptr ||
      dynamic_cast<const InvalidArgument *>(&error) != nullptr) {
    return kExitConfig;
  }
  if (dynamic_cast<const DataError *>(&error) != nullptr ||
      dynamic_cast<const DimensionMismatch *>(&error) != nullptr ||
      dynamic_cast<const std::filesystem::filesystem_error *>(&error) != nullptr) {
    return kExitData;
  }
  if (dynamic_cast<const NotPositiveDefinite *>(&error) != nullptr ||
      dynamic_cast<const NonFiniteObjective *>(&error) != nullptr ||
      dynamic_cast<const EvaluationError *>(&error) != nullptr) {
    return kExitNumerical;
  }
  return 1;
}

TrainConfig train_config_from(const RunConfig &config) {
  TrainConfig c;
  c.epochs = static_cast<int>(config.get_int("epochs"));
  c.batch_size = static_cast<int>(config.get_int("batch_size"));
  c.inducing_count = static_cast<int>(config.get_int("inducing_count"));
  c.lr_phi_init = config.get_real("lr_phi");
  c.lr_theta_init = config.get_real("lr_theta");
  c.lr_decay = config.get_real("lr_decay");
  c.restarts = static_cast<int>(config.get_int("restarts"));
  c.seed = static_cast<std::uint64_t>(config.get_int("seed"));
  c.early_stop_patience = static_cast<int>(config.get_int("early_stop_patience"));
  c.closed_form_theta = config.get_bool("closed_form_theta");
  c.gh_nodes = static_cast<int>(config.get_int("gh_nodes"));
  c.mc_samples = static_cast<int>(config.get_int("mc_samples"));
  c.optimize_inducing = config.get_bool("optimize_inducing");
  c.max_aborted_steps = static_cast<int>(config.get_int("max_aborted_steps"));
  c.initial_lengthscale = config.get_real("initial_lengthscale");
  c.initial_output_scale = config.get_real("initial_output_scale");
  try {
    c.kernel_family = parse_kernel_family(config.get_string("kernel"));
    c.validate();
  } catch (const InvalidArgument &e) {
    throw ConfigError(e.what());
  }
  return c;
}

std::string trace_csv(const TrainTrace &trace) {
  CsvWriter w({"restart", "epoch", "elbo", "noise", "outlier_prob", "inflation", "noise_var", "dof",
               "scale", "validation_nlpd", "aborted_steps", "selected"});
  for (const auto &row : trace.rows) {
    std::string pi, tau, s2, dof, scale;
    if (const auto *g = std::get_if<GaussianNoise>(&row.noise)) {
      s2 = detail::fmt(g->noise_var);
    } else if (const auto *c = std::get_if<ContaminatedNormal>(&row.noise)) {
      pi = detail::fmt(c->outlier_prob);
      tau = detail::fmt(c->inflation);
      s2 = detail::fmt(c->noise_var);
    } else if (const auto *t = std::get_if<StudentTNoise>(&row.noise)) {
      dof = detail::fmt(t->dof);
      scale = detail::fmt(t->scale);
    } else if (const auto *l = std::get_if<LaplaceNoise>(&row.noise)) {
      scale = detail::fmt(l->scale);
    }
    w.add({std::to_string(row.restart), std::to_string(row.epoch), detail::fmt(row.elbo),
           std::string(to_string(family_of(row.noise))), pi, tau, s2, dof, scale,
           detail::fmt(row.validation_nlpd), std::to_string(row.aborted_steps),
           row.restart == trace.selected_restart ? "1" : "0"});
  }
  return w.str();
}

std::vector<std::filesystem::path> run_command(const RunConfig &config) {
  const std::string &c = config.command();
  if (c == "simulate") {
    return cmd_simulate(config);
  }
  if (c == "features") {
    return cmd_features(config);
  }
  if (c == "train") {
    return cmd_train(config);
  }
  if (c == "predict") {
    return cmd_predict(config);
  }
  if (c == "evaluate") {
    return cmd_evaluate(config);
  }
  if (c == "benchmark") {
    return cmd_benchmark(config);
  }
  throw ConfigError("unknown command '" + c + "'");
}

int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
  CLI::App app{"Sparse variational GP regression with robust noise models"};
  app.require_subcommand(1);
  const std::vector<std::pair<std::string, std::string>> commands{
      {"simulate", "write simulated train/validation/test CSV files"},
      {"features", "build lagged window features from a timestamped CSV"},
      {"train", "fit a model and write the artifact and training trace"},
      {"predict", "write predictive summaries for a CSV"},
      {"evaluate", "compute metrics from a predictions file"},
      {"benchmark", "compare noise models across outlier scenarios"},
  };
  std::map<std::string, std::string> config_files;
  std::map<std::string, std::vector<std::string>> overrides;
  std::map<std::string, bool> list_keys;
  for (const auto &[name, help] : commands) {
    CLI::App *sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config_files[name], "key = value configuration file");
    sub->add_option("-s,--set", overrides[name], "override one key (KEY=VALUE), repeatable");
    sub->add_flag("--list-keys", list_keys[name], "print the accepted keys and defaults");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const CLI::App *sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    RunConfig config = make_config(name);
    if (list_keys[name]) {
      for (const auto &k : config.schema()) {
        out << k.name << " = " << k.default_value << "    # " << k.help << "\n";
      }
      return kExitOk;
    }
    if (!config_files[name].empty()) {
      config.merge_file(config_files[name]);
    }
    for (const auto &assignment : overrides[name]) {
      config.set(std::string_view(assignment));
    }
    for (const auto &path : run_command(config)) {
      out << path.string() << "\n";
    }
    return kExitOk;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

} // namespace cngp::cli
