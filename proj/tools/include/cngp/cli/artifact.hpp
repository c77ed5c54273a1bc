#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cngp/data.hpp"
#include "cngp/inference.hpp"

namespace cngp::cli {

inline constexpr int kArtifactFormatVersion = 1;

struct TargetScaling {
  double mean = 0.0;
  double sd = 1.0;
};

struct TrainingMetadata {
  std::uint64_t seed = 0;
  int epochs = 0;
  int restarts = 0;
  int selected_restart = 0;
  double final_elbo = 0.0;
};

/// Everything needed to reproduce predictions from raw feature columns.
/// Stored as JSON; doubles are written in shortest round-trip form so a
/// reload is bit-exact.
struct ModelArtifact {
  ModelState model;
  std::vector<std::string> feature_names;
  std::string target_name = "y";
  std::optional<Standardizer> standardizer;
  std::optional<TargetScaling> target_scaling;
  TrainingMetadata training;
};

std::string artifact_to_json(const ModelArtifact &artifact);
ModelArtifact artifact_from_json(const std::string &text);
void save_artifact(const std::filesystem::path &path, const ModelArtifact &artifact);
ModelArtifact load_artifact(const std::filesystem::path &path);

/// y -> shift + scale * y applied to a predictive law.
PredictiveDistribution rescale(const PredictiveDistribution &pred, double shift, double scale);

/// Predictions in the original target units from unstandardized features
/// laid out in artifact.feature_names order.
std::vector<PredictiveDistribution> predict_raw(const ModelArtifact &artifact,
                                                const Eigen::MatrixXd &features,
                                                const PredictOptions &options);

/// Columns of `ds` reordered to the artifact's features; throws
/// FeatureMismatch naming every missing column.
Eigen::MatrixXd select_features(const ModelArtifact &artifact, const Dataset &ds);

} // namespace cngp::cli
