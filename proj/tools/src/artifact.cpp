#include "cngp/cli/artifact.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cngp/cli/config.hpp"
#include "cngp/error.hpp"

namespace cngp::cli {

namespace {

using nlohmann::json;

json vector_json(const Eigen::VectorXd &v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json matrix_json(const Eigen::MatrixXd &m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    rows.push_back(vector_json(m.row(i).transpose()));
  }
  return rows;
}

Eigen::VectorXd vector_from(const json &j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd matrix_from(const json &j, Eigen::Index cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Eigen::VectorXd row = vector_from(j[i]);
    if (row.size() != cols) {
      throw DataError("model artifact: ragged matrix");
    }
    m.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return m;
}

json noise_json(const NoiseModel &noise) {
  json j;
  j["family"] = std::string(to_string(family_of(noise)));
  if (const auto *g = std::get_if<GaussianNoise>(&noise)) {
    j["noise_var"] = g->noise_var;
  } else if (const auto *c = std::get_if<ContaminatedNormal>(&noise)) {
    j["outlier_prob"] = c->outlier_prob;
    j["inflation"] = c->inflation;
    j["noise_var"] = c->noise_var;
  } else if (const auto *t = std::get_if<StudentTNoise>(&noise)) {
    j["dof"] = t->dof;
    j["scale"] = t->scale;
  } else if (const auto *l = std::get_if<LaplaceNoise>(&noise)) {
    j["scale"] = l->scale;
  }
  return j;
}

NoiseModel noise_from(const json &j) {
  switch (parse_noise_family(j.at("family").get<std::string>())) {
  case NoiseFamily::Gaussian:
    return GaussianNoise{j.at("noise_var").get<double>()};
  case NoiseFamily::ContaminatedNormal:
    return ContaminatedNormal{j.at("outlier_prob").get<double>(), j.at("inflation").get<double>(),
                              j.at("noise_var").get<double>()};
  case NoiseFamily::StudentT:
    return StudentTNoise{j.at("dof").get<double>(), j.at("scale").get<double>()};
  case NoiseFamily::Laplace:
    return LaplaceNoise{j.at("scale").get<double>()};
  }
  throw DataError("model artifact: unknown noise family");
}

} // namespace

std::string artifact_to_json(const ModelArtifact &a) {
  json j;
  j["format"] = "cngp-model";
  j["format_version"] = kArtifactFormatVersion;
  j["feature_names"] = a.feature_names;
  j["target_name"] = a.target_name;
  j["kernel"] = {{"family", std::string(to_string(a.model.kernel.family))},
                 {"output_scale", a.model.kernel.output_scale},
                 {"lengthscales", vector_json(a.model.kernel.lengthscales)}};
  j["noise"] = noise_json(a.model.noise);
  const VariationalState &v = a.model.variational;
  j["variational"] = {{"parameterization", "whitened"},
                      {"inducing_inputs", matrix_json(v.inducing_inputs)},
                      {"mean", vector_json(v.mean)},
                      {"cov_factor", matrix_json(v.cov_factor)}};
  if (a.standardizer) {
    j["standardizer"] = {{"means", vector_json(a.standardizer->means)},
                         {"sds", vector_json(a.standardizer->sds)}};
  } else {
    j["standardizer"] = nullptr;
  }
  if (a.target_scaling) {
    j["target_scaling"] = {{"mean", a.target_scaling->mean}, {"sd", a.target_scaling->sd}};
  } else {
    j["target_scaling"] = nullptr;
  }
  j["training"] = {{"seed", a.training.seed},
                   {"epochs", a.training.epochs},
                   {"restarts", a.training.restarts},
                   {"selected_restart", a.training.selected_restart},
                   {"final_elbo", a.training.final_elbo}};
  return j.dump(1) + "\n";
}

ModelArtifact artifact_from_json(const std::string &text) {
  ModelArtifact a;
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != "cngp-model") {
      throw DataError("model artifact: not a cngp model file");
    }
    if (j.at("format_version").get<int>() != kArtifactFormatVersion) {
      throw DataError("model artifact: unsupported format version");
    }
    a.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    a.target_name = j.at("target_name").get<std::string>();
    const auto p = static_cast<Eigen::Index>(a.feature_names.size());
    const json &k = j.at("kernel");
    a.model.kernel.family = parse_kernel_family(k.at("family").get<std::string>());
    a.model.kernel.output_scale = k.at("output_scale").get<double>();
    a.model.kernel.lengthscales = vector_from(k.at("lengthscales"));
    a.model.noise = noise_from(j.at("noise"));
    const json &v = j.at("variational");
    if (v.at("parameterization").get<std::string>() != "whitened") {
      throw DataError("model artifact: unsupported variational parameterization");
    }
    a.model.variational.inducing_inputs = matrix_from(v.at("inducing_inputs"), p);
    a.model.variational.mean = vector_from(v.at("mean"));
    a.model.variational.cov_factor = matrix_from(v.at("cov_factor"), a.model.variational.mean.size());
    if (!j.at("standardizer").is_null()) {
      a.standardizer = Standardizer{vector_from(j["standardizer"].at("means")),
                                    vector_from(j["standardizer"].at("sds"))};
    }
    if (!j.at("target_scaling").is_null()) {
      a.target_scaling = TargetScaling{j["target_scaling"].at("mean").get<double>(),
                                       j["target_scaling"].at("sd").get<double>()};
    }
    const json &t = j.at("training");
    a.training.seed = t.at("seed").get<std::uint64_t>();
    a.training.epochs = t.at("epochs").get<int>();
    a.training.restarts = t.at("restarts").get<int>();
    a.training.selected_restart = t.at("selected_restart").get<int>();
    a.training.final_elbo = t.at("final_elbo").get<double>();
  } catch (const json::exception &e) {
    throw DataError(std::string("model artifact: ") + e.what());
  }
  try {
    a.model.validate();
  } catch (const Error &e) {
    throw DataError(std::string("model artifact: ") + e.what());
  }
  return a;
}

void save_artifact(const std::filesystem::path &path, const ModelArtifact &artifact) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot write '" + path.string() + "'");
  }
  out << artifact_to_json(artifact);
}

ModelArtifact load_artifact(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open model artifact '" + path.string() + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return artifact_from_json(buf.str());
}

PredictiveDistribution rescale(const PredictiveDistribution &pred, double shift, double scale) {
  if (const auto *g = std::get_if<GaussianPred>(&pred)) {
    return GaussianPred{shift + scale * g->mean, scale * scale * g->var};
  }
  if (const auto *m = std::get_if<MixturePred>(&pred)) {
    return MixturePred{m->weight, shift + scale * m->mean, scale * scale * m->var_outlier,
                       scale * scale * m->var_inlier};
  }
  SampledPred s = std::get<SampledPred>(pred);
  for (double &f : s.latent_samples) {
    f = shift + scale * f;
  }
  if (auto *t = std::get_if<StudentTNoise>(&s.noise)) {
    t->scale *= scale;
  } else if (auto *l = std::get_if<LaplaceNoise>(&s.noise)) {
    l->scale *= scale;
  } else if (auto *g = std::get_if<GaussianNoise>(&s.noise)) {
    g->noise_var *= scale * scale;
  } else if (auto *c = std::get_if<ContaminatedNormal>(&s.noise)) {
    c->noise_var *= scale * scale;
  }
  return s;
}

std::vector<PredictiveDistribution> predict_raw(const ModelArtifact &artifact,
                                                const Eigen::MatrixXd &features,
                                                const PredictOptions &options) {
  const Eigen::MatrixXd x = artifact.standardizer ? artifact.standardizer->apply(features) : features;
  auto preds = predict(artifact.model, x, options);
  if (artifact.target_scaling) {
    for (auto &p : preds) {
      p = rescale(p, artifact.target_scaling->mean, artifact.target_scaling->sd);
    }
  }
  return preds;
}

Eigen::MatrixXd select_features(const ModelArtifact &artifact, const Dataset &ds) {
  std::vector<Eigen::Index> cols;
  std::string missing;
  for (const auto &name : artifact.feature_names) {
    const auto it = std::find(ds.feature_names.begin(), ds.feature_names.end(), name);
    if (it == ds.feature_names.end()) {
      missing += (missing.empty() ? "" : ", ") + name;
    } else {
      cols.push_back(it - ds.feature_names.begin());
    }
  }
  if (!missing.empty()) {
    throw FeatureMismatch("missing feature columns: " + missing);
  }
  Eigen::MatrixXd x(ds.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    x.col(static_cast<Eigen::Index>(j)) = ds.features.col(cols[j]);
  }
  return x;
}

} // namespace cngp::cli
