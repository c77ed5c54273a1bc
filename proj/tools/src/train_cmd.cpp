#include <cmath>

#include "cngp/cli/artifact.hpp"
#include "cngp/cli/commands.hpp"
#include "cngp/cli/table.hpp"
#include "cngp/data.hpp"
#include "common.hpp"

namespace cngp::cli {

using detail::fmt;

namespace {

CsvLoadResult load_for_training(const std::filesystem::path &path, const RunConfig &config) {
  CsvLoadOptions options;
  options.target_column = config.get_string("target_column");
  options.feature_columns = config.get_list("feature_columns");
  options.optional_carry_columns = config.get_list("side_columns");
  return load_csv(path, options);
}

} // namespace

std::vector<std::filesystem::path> cmd_train(const RunConfig &config) {
  const auto train_path = detail::existing_input(config, "train_path");
  const bool has_validation_file = config.has("validation_path");
  const auto validation_path =
      has_validation_file ? detail::existing_input(config, "validation_path") : std::filesystem::path();
  const TrainConfig train = train_config_from(config);
  NoiseFamily family{};
  try {
    family = parse_noise_family(config.get_string("noise"));
  } catch (const InvalidArgument &e) {
    throw ConfigError(e.what());
  }
  const auto dir = detail::prepare_output_dir(config);
  const auto model_path = detail::output_path(config, "model_path", "model.json");
  const auto trace_path = dir / "trace.csv";

  const CsvLoadResult loaded = load_for_training(train_path, config);
  const Dataset &all = loaded.dataset;
  Dataset train_set = all.subset(SplitLabel::Train);
  if (train_set.rows() < 1) {
    throw DataTooSmall("no training rows");
  }
  std::optional<Dataset> validation_set;
  std::size_t dropped_validation = 0;
  if (has_validation_file) {
    auto v = load_for_training(validation_path, config);
    dropped_validation = v.dropped_rows;
    validation_set = std::move(v.dataset);
  } else if (!all.rows_with(SplitLabel::Validation).empty()) {
    validation_set = all.subset(SplitLabel::Validation);
  }

  ModelArtifact artifact;
  artifact.feature_names = train_set.feature_names;
  artifact.target_name = train_set.target_name;
  Eigen::MatrixXd x = train_set.features;
  Eigen::VectorXd y = train_set.target;
  if (config.get_bool("standardize")) {
    artifact.standardizer = fit_standardizer(train_set);
    x = artifact.standardizer->apply(x);
  }
  if (config.get_bool("standardize_target")) {
    const double mean = y.mean();
    const double sd = std::sqrt((y.array() - mean).square().sum() / static_cast<double>(std::max<Eigen::Index>(y.size() - 1, 1)));
    if (!(sd > 0.0)) {
      throw ConstantColumn("target is constant on the training rows");
    }
    artifact.target_scaling = TargetScaling{mean, sd};
    y = (y.array() - mean) / sd;
  }
  std::optional<ValidationSet> validation;
  if (validation_set) {
    Eigen::MatrixXd vx = validation_set->features;
    if (vx.cols() != x.cols()) {
      throw FeatureMismatch("validation features do not match training features");
    }
    if (artifact.standardizer) {
      vx = artifact.standardizer->apply(vx);
    }
    Eigen::VectorXd vy = validation_set->target;
    if (artifact.target_scaling) {
      vy = (vy.array() - artifact.target_scaling->mean) / artifact.target_scaling->sd;
    }
    validation = ValidationSet{vx, vy};
  }

  const FitResult result = fit(x, y, family, train, validation);
  artifact.model = result.model;
  artifact.training = {train.seed, train.epochs, train.restarts, result.trace.selected_restart,
                       result.trace.final_elbos[static_cast<std::size_t>(result.trace.selected_restart)]};
  save_artifact(model_path, artifact);
  write_text(trace_path, trace_csv(result.trace));

  std::vector<std::pair<std::string, std::string>> entries{
      {"train_rows", std::to_string(x.rows())},
      {"dropped_rows", std::to_string(loaded.dropped_rows + dropped_validation)},
      {"validation_rows", std::to_string(validation ? validation->y.size() : 0)},
      {"features", std::to_string(x.cols())},
      {"selected_restart", std::to_string(artifact.training.selected_restart)},
      {"final_elbo", fmt(artifact.training.final_elbo)},
  };
  entries.emplace_back("noise_family", std::string(to_string(family)));
  if (const auto *cn = std::get_if<ContaminatedNormal>(&artifact.model.noise)) {
    entries.insert(entries.end(), {{"outlier_prob", fmt(cn->outlier_prob)},
                                   {"inflation", fmt(cn->inflation)},
                                   {"noise_var", fmt(cn->noise_var)}});
  }
  return {model_path, trace_path, detail::write_manifest(config, entries)};
}

} // namespace cngp::cli
