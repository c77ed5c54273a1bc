#include "cngp/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace cngp::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_bool(const std::string &v, bool &out) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") {
    out = true;
    return true;
  }
  if (v == "false" || v == "0" || v == "no" || v == "off") {
    out = false;
    return true;
  }
  return false;
}

bool parse_int(const std::string &v, std::int64_t &out) {
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  return ec == std::errc() && p == v.data() + v.size();
}

bool parse_real(const std::string &v, double &out) {
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  return ec == std::errc() && p == v.data() + v.size();
}

std::vector<KeySpec> training_keys() {
  return {
      {"noise", ValueType::String, "cn", "gaussian | cn | student_t | laplace"},
      {"kernel", ValueType::String, "se", "se | matern32"},
      {"epochs", ValueType::Integer, "30", "passes over the training data"},
      {"batch_size", ValueType::Integer, "256", "minibatch size"},
      {"inducing_count", ValueType::Integer, "100", "number of inducing points"},
      {"lr_phi", ValueType::Real, "0.1", "initial step size for variational parameters"},
      {"lr_theta", ValueType::Real, "0.1", "initial step size for hyperparameters"},
      {"lr_decay", ValueType::Real, "0.9", "per-epoch step-size decay factor"},
      {"restarts", ValueType::Integer, "5", "independent initializations"},
      {"early_stop_patience", ValueType::Integer, "5", "epochs without validation improvement (0 disables)"},
      {"closed_form_theta", ValueType::Boolean, "true", "closed-form CN noise updates once per epoch"},
      {"gh_nodes", ValueType::Integer, "20", "Gauss-Hermite nodes"},
      {"mc_samples", ValueType::Integer, "1000", "latent draws for sampled predictive laws"},
      {"optimize_inducing", ValueType::Boolean, "true", "learn inducing inputs"},
      {"max_aborted_steps", ValueType::Integer, "20", "non-finite steps tolerated per run"},
      {"initial_lengthscale", ValueType::Real, "1.0", "starting lengthscale (standardized inputs)"},
      {"initial_output_scale", ValueType::Real, "1.0", "starting kernel output scale"},
  };
}

std::vector<KeySpec> loading_keys() {
  return {
      {"target_column", ValueType::String, "y", "response column"},
      {"feature_columns", ValueType::List, "", "input columns (empty: all remaining numeric columns)"},
      {"side_columns", ValueType::List, "f,outlier,storm", "carried along when present, never used as inputs"},
  };
}

void append(std::vector<KeySpec> &to, const std::vector<KeySpec> &from) {
  to.insert(to.end(), from.begin(), from.end());
}

} // namespace

std::vector<KeySpec> schema_for(std::string_view command) {
  std::vector<KeySpec> keys{{"seed", ValueType::Integer, "0", "master seed"},
                            {"output_dir", ValueType::Path, ".", "directory for outputs"}};
  if (command == "simulate") {
    append(keys, {
                     {"generator", ValueType::String, "sim1", "sim1 | friedman"},
                     {"n_train", ValueType::Integer, "2000", "training rows"},
                     {"n_validation", ValueType::Integer, "0", "validation rows"},
                     {"n_test", ValueType::Integer, "1000", "test rows"},
                     {"outlier_prob", ValueType::Real, "0.1", "sim1: pi"},
                     {"inflation", ValueType::Real, "10", "sim1: tau"},
                     {"noise_var", ValueType::Real, "1", "sim1: sigma^2"},
                     {"scenario", ValueType::Integer, "0", "friedman: outlier scenario 1-4 (0: use p_outlier/sigma_outlier)"},
                     {"p_outlier", ValueType::Real, "0.1", "friedman: replaced proportion"},
                     {"sigma_outlier", ValueType::Real, "3", "friedman: outlier sd"},
                     {"noise_free_test", ValueType::Boolean, "true", "test targets equal the latent function"},
                 });
  } else if (command == "train") {
    append(keys, {
                     {"train_path", ValueType::Path, "", "training CSV (rows labeled validation/test are held out)"},
                     {"validation_path", ValueType::Path, "", "optional validation CSV"},
                     {"standardize", ValueType::Boolean, "true", "standardize inputs with training statistics"},
                     {"standardize_target", ValueType::Boolean, "false", "also standardize the response"},
                     {"model_path", ValueType::Path, "", "model artifact (default output_dir/model.json)"},
                 });
    append(keys, loading_keys());
    append(keys, training_keys());
  } else if (command == "predict") {
    append(keys, {
                     {"model_path", ValueType::Path, "", "model artifact"},
                     {"data_path", ValueType::Path, "", "CSV with the model's feature columns"},
                     {"level", ValueType::Real, "0.95", "central interval probability"},
                     {"mc_samples", ValueType::Integer, "1000", "latent draws for sampled predictive laws"},
                     {"predictions_path", ValueType::Path, "", "output (default output_dir/predictions.csv)"},
                     {"side_columns", ValueType::List, "f,outlier,storm", "carried into the output when present"},
                 });
  } else if (command == "evaluate") {
    append(keys, {
                     {"predictions_path", ValueType::Path, "", "predictions CSV written by predict"},
                     {"split", ValueType::String, "", "only rows with this split label (empty: all rows)"},
                     {"truth_column", ValueType::String, "target", "observed values in the predictions file"},
                     {"flag_column", ValueType::String, "storm", "subset indicator (ignored when absent)"},
                     {"thresholds", ValueType::List, "", "explicit event thresholds"},
                     {"threshold_source", ValueType::Path, "", "CSV whose target quantiles give thresholds"},
                     {"threshold_column", ValueType::String, "y", "column of threshold_source"},
                     {"threshold_split", ValueType::String, "train", "rows of threshold_source used (when labeled)"},
                     {"threshold_quantiles", ValueType::List, "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9", "quantile levels"},
                     {"skill_input", ValueType::String, "mean", "prediction scored against thresholds: mean | lo | hi"},
                     {"metrics_path", ValueType::Path, "", "output (default output_dir/metrics.csv)"},
                 });
  } else if (command == "benchmark") {
    append(keys, {
                     {"scenarios", ValueType::List, "1,2,3,4", "outlier scenarios"},
                     {"reps", ValueType::Integer, "10", "replications per scenario"},
                     {"n_train", ValueType::Integer, "2000", "training rows per replication"},
                     {"n_test", ValueType::Integer, "1000", "noise-free test rows"},
                     {"models", ValueType::List, "gaussian,cn,student_t,laplace", "noise families"},
                     {"threads", ValueType::Integer, "1", "worker threads"},
                 });
    append(keys, training_keys());
  } else if (command == "features") {
    append(keys, {
                     {"input_path", ValueType::Path, "", "raw timestamped CSV"},
                     {"covariates", ValueType::List, "", "covariate columns to pool"},
                     {"response", ValueType::String, "y", "response column"},
                     {"flags", ValueType::List, "storm", "indicator columns aggregated by window max"},
                     {"pool_minutes", ValueType::Integer, "5", "pooling width"},
                     {"lookback_minutes", ValueType::Integer, "60", "lookback length"},
                     {"window_minutes", ValueType::Integer, "20", "target window"},
                     {"seasonal", ValueType::Boolean, "true", "add time-of-day and day-of-year terms"},
                     {"validation_year", ValueType::Integer, "0", "first validation year (0: no time split)"},
                     {"test_year", ValueType::Integer, "0", "first test year"},
                     {"dataset_path", ValueType::Path, "", "output (default output_dir/features.csv)"},
                 });
  } else {
    throw ConfigError("unknown command '" + std::string(command) + "'");
  }
  return keys;
}

RunConfig make_config(std::string_view command) {
  return RunConfig(std::string(command), schema_for(command));
}

RunConfig::RunConfig(std::string command, std::vector<KeySpec> schema)
    : command_(std::move(command)), schema_(std::move(schema)) {
  for (const auto &k : schema_) {
    values_[k.name] = k.default_value;
  }
}

const KeySpec &RunConfig::spec_for(const std::string &key) const {
  const auto it = std::find_if(schema_.begin(), schema_.end(),
                               [&](const KeySpec &k) { return k.name == key; });
  if (it == schema_.end()) {
    throw ConfigError("unknown key '" + key + "' for command '" + command_ + "'");
  }
  return *it;
}

void RunConfig::check_type(const KeySpec &spec, const std::string &value) const {
  bool ok = true;
  switch (spec.type) {
  case ValueType::Integer: {
    std::int64_t v = 0;
    ok = parse_int(value, v);
    break;
  }
  case ValueType::Real: {
    double v = 0.0;
    ok = parse_real(value, v);
    break;
  }
  case ValueType::Boolean: {
    bool v = false;
    ok = parse_bool(value, v);
    break;
  }
  default:
    break;
  }
  if (!ok) {
    throw ConfigError("key '" + spec.name + "': cannot parse '" + value + "'");
  }
}

void RunConfig::set(const std::string &key, const std::string &value) {
  const KeySpec &spec = spec_for(key);
  const std::string v = trim(value);
  check_type(spec, v);
  values_[key] = v;
}

void RunConfig::set(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
  }
  set(trim(assignment.substr(0, eq)), std::string(assignment.substr(eq + 1)));
}

void RunConfig::merge_text(std::string_view text, std::string_view origin) {
  std::istringstream in{std::string(text)};
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) {
      continue;
    }
    try {
      set(std::string_view(body));
    } catch (const ConfigError &e) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void RunConfig::merge_file(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read config file '" + path.string() + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  merge_text(buf.str(), path.string());
}

bool RunConfig::has(const std::string &key) const {
  spec_for(key);
  return !values_.at(key).empty();
}

std::string RunConfig::get_string(const std::string &key) const {
  spec_for(key);
  return values_.at(key);
}

std::filesystem::path RunConfig::get_path(const std::string &key) const {
  return std::filesystem::path(get_string(key));
}

std::int64_t RunConfig::get_int(const std::string &key) const {
  std::int64_t v = 0;
  if (!parse_int(get_string(key), v)) {
    throw ConfigError("key '" + key + "' is not an integer");
  }
  return v;
}

double RunConfig::get_real(const std::string &key) const {
  double v = 0.0;
  if (!parse_real(get_string(key), v)) {
    throw ConfigError("key '" + key + "' is not a number");
  }
  return v;
}

bool RunConfig::get_bool(const std::string &key) const {
  bool v = false;
  if (!parse_bool(get_string(key), v)) {
    throw ConfigError("key '" + key + "' is not a boolean");
  }
  return v;
}

std::vector<std::string> RunConfig::get_list(const std::string &key) const {
  std::vector<std::string> out;
  std::istringstream in(get_string(key));
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) {
      out.push_back(item);
    }
  }
  return out;
}

std::vector<double> RunConfig::get_real_list(const std::string &key) const {
  std::vector<double> out;
  for (const auto &item : get_list(key)) {
    double v = 0.0;
    if (!parse_real(item, v)) {
      throw ConfigError("key '" + key + "': '" + item + "' is not a number");
    }
    out.push_back(v);
  }
  return out;
}

std::string RunConfig::echo() const {
  std::string out;
  for (const auto &[k, v] : values_) {
    out += k + " = " + v + "\n";
  }
  return out;
}

} // namespace cngp::cli
