#include "fedmse/config.hpp"

#include <fmt/format.h>

#include "fedmse/model_io.hpp"

namespace fedmse {

using nlohmann::json;

void ExperimentConfig::validate() const {
  if (data.source != "synthetic" && data.source != "manifest")
    throw ConfigError("data.source must be 'synthetic' or 'manifest'");
  if (data.source == "manifest" && data.manifest.empty())
    throw ConfigError("data.manifest is required when data.source is 'manifest'");
  if (!(data.subsample > 0 && data.subsample <= 1)) throw ConfigError("data.subsample must be in (0, 1]");
  if (data.synthetic.dims < 2) throw ConfigError("data.synthetic.dims must be >= 2");
  if (data.synthetic.device_types < 1) throw ConfigError("data.synthetic.device_types must be >= 1");
  if (data.synthetic.normals_per_type < 1) throw ConfigError("data.synthetic.normals_per_type must be >= 1");
  if (data.synthetic.anomalies_per_type < 0) throw ConfigError("data.synthetic.anomalies_per_type must be >= 0");
  if (!(data.synthetic.separation > 0)) throw ConfigError("data.synthetic.separation must be > 0");
  if (data.synthetic.rank < 0) throw ConfigError("data.synthetic.rank must be >= 0");
  if (!(data.anomaly_ratio > 0)) throw ConfigError("data.anomaly_ratio must be > 0 (AUC needs anomalies)");
  if (!(data.new_device_fraction >= 0)) throw ConfigError("data.new_device_fraction must be >= 0");
  if (n_gateways < 2) throw ConfigError("n_gateways must be >= 2");
  if (!(gateway_ratio > 0 && gateway_ratio <= 1)) throw ConfigError("gateway_ratio must be in (0, 1]");
  if (!(dirichlet_alpha > 0)) throw ConfigError("dirichlet_alpha must be > 0");
  if (models.empty()) throw ConfigError("models must not be empty");
  if (algorithms.empty()) throw ConfigError("algorithms must not be empty");
  train.validate();
  if (hidden_dim < -1) throw ConfigError("hidden_dim must be >= -1");
  if (latent_dim < 0) throw ConfigError("latent_dim must be >= 0");
  if (global_rounds < 0) throw ConfigError("global_rounds must be >= 0");
  if (global_patience < 1) throw ConfigError("global_patience must be >= 1");
  if (!(global_min_delta >= 0)) throw ConfigError("global_min_delta must be >= 0");
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  if (!(threshold_quantile >= 0 && threshold_quantile <= 1))
    throw ConfigError("threshold_quantile must be in [0, 1]");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (sweep) {
    if (sweep->parameter != "gateway_ratio" && sweep->parameter != "n_gateways")
      throw ConfigError("sweep.parameter must be 'gateway_ratio' or 'n_gateways'");
    if (sweep->values.empty()) throw ConfigError("sweep.values must not be empty");
    for (double v : sweep->values) {
      if (sweep->parameter == "gateway_ratio" && !(v > 0 && v <= 1))
        throw ConfigError("sweep: gateway ratios must be in (0, 1]");
      if (sweep->parameter == "n_gateways" && (!(v >= 2) || v != std::floor(v)))
        throw ConfigError("sweep: network scales must be integers >= 2");
    }
  }
}

FederationConfig ExperimentConfig::federation(DetectorKind model, Aggregation algorithm) const {
  FederationConfig f;
  f.model = model;
  f.algorithm = algorithm;
  f.train = train;
  f.global_rounds = global_rounds;
  f.gateway_ratio = gateway_ratio;
  f.global_patience = global_patience;
  f.global_min_delta = global_min_delta;
  f.threads = threads;
  return f;
}

json to_json(const ExperimentConfig& c) {
  json models = json::array(), algorithms = json::array();
  for (auto m : c.models) models.push_back(to_string(m));
  for (auto a : c.algorithms) algorithms.push_back(to_string(a));
  const auto& s = c.data.synthetic;
  return json{
      {"data",
       {{"source", c.data.source},
        {"manifest", c.data.manifest},
        {"subsample", c.data.subsample},
        {"synthetic",
         {{"device_types", s.device_types},
          {"dims", s.dims},
          {"normals_per_type", s.normals_per_type},
          {"anomalies_per_type", s.anomalies_per_type},
          {"separation", s.separation},
          {"rank", s.rank}}},
        {"anomaly_ratio", c.data.anomaly_ratio},
        {"new_device_types", c.data.new_device_types},
        {"new_device_fraction", c.data.new_device_fraction}}},
      {"n_gateways", c.n_gateways},
      {"gateway_ratio", c.gateway_ratio},
      {"dirichlet_alpha", c.dirichlet_alpha},
      {"models", models},
      {"algorithms", algorithms},
      {"train",
       {{"learning_rate", c.train.learning_rate},
        {"batch_size", c.train.batch_size},
        {"local_epochs", c.train.local_epochs},
        {"shrink_lambda", c.train.shrink_lambda},
        {"prox_mu", c.train.prox_mu},
        {"patience", c.train.patience},
        {"min_delta", c.train.min_delta}}},
      {"hidden_dim", c.hidden_dim},
      {"latent_dim", c.latent_dim},
      {"global_rounds", c.global_rounds},
      {"global_patience", c.global_patience},
      {"global_min_delta", c.global_min_delta},
      {"repeats", c.repeats},
      {"master_seed", c.master_seed},
      {"threshold_quantile", c.threshold_quantile},
      {"threads", c.threads},
      {"sweep", c.sweep ? json{{"parameter", c.sweep->parameter}, {"values", c.sweep->values}}
                        : json(nullptr)},
      {"output_dir", c.output_dir}};
}

namespace {

/// Rejects keys of `user` that the defaults do not have.
void check_keys(const json& user, const json& defaults, const std::string& prefix) {
  if (!user.is_object()) throw ConfigError("config: '" + (prefix.empty() ? "<root>" : prefix) + "' must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!defaults.contains(key)) throw ConfigError("config: unknown key '" + path + "'");
    if (defaults[key].is_object() && !value.is_null()) check_keys(value, defaults[key], path);
  }
}

template <typename T>
T get(const json& j, const char* key, const std::string& path) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: '" + path + "' has the wrong type");
  }
}

std::vector<std::string> string_list(const json& j, const char* key) {
  if (j.at(key).is_string()) return {j.at(key).get<std::string>()};
  return get<std::vector<std::string>>(j, key, key);
}

}  // namespace

ExperimentConfig config_from_json(const json& user) {
  const json defaults = to_json(ExperimentConfig{});
  check_keys(user, defaults, "");
  json j = defaults;
  j.merge_patch(user);
  if (user.contains("sweep")) j["sweep"] = user["sweep"];

  ExperimentConfig c;
  const json& d = j["data"];
  c.data.source = get<std::string>(d, "source", "data.source");
  c.data.manifest = get<std::string>(d, "manifest", "data.manifest");
  c.data.subsample = get<double>(d, "subsample", "data.subsample");
  const json& s = d["synthetic"];
  c.data.synthetic.device_types = get<int>(s, "device_types", "data.synthetic.device_types");
  c.data.synthetic.dims = get<int>(s, "dims", "data.synthetic.dims");
  c.data.synthetic.normals_per_type = get<int>(s, "normals_per_type", "data.synthetic.normals_per_type");
  c.data.synthetic.anomalies_per_type = get<int>(s, "anomalies_per_type", "data.synthetic.anomalies_per_type");
  c.data.synthetic.separation = get<double>(s, "separation", "data.synthetic.separation");
  c.data.synthetic.rank = get<int>(s, "rank", "data.synthetic.rank");
  c.data.anomaly_ratio = get<double>(d, "anomaly_ratio", "data.anomaly_ratio");
  c.data.new_device_types = get<std::vector<int>>(d, "new_device_types", "data.new_device_types");
  c.data.new_device_fraction = get<double>(d, "new_device_fraction", "data.new_device_fraction");

  c.n_gateways = get<int>(j, "n_gateways", "n_gateways");
  c.gateway_ratio = get<double>(j, "gateway_ratio", "gateway_ratio");
  c.dirichlet_alpha = get<double>(j, "dirichlet_alpha", "dirichlet_alpha");
  c.models.clear();
  for (const auto& m : string_list(j, "models")) c.models.push_back(detector_kind_from_string(m));
  c.algorithms.clear();
  for (const auto& a : string_list(j, "algorithms")) c.algorithms.push_back(aggregation_from_string(a));

  const json& t = j["train"];
  c.train.learning_rate = get<double>(t, "learning_rate", "train.learning_rate");
  c.train.batch_size = get<int>(t, "batch_size", "train.batch_size");
  c.train.local_epochs = get<int>(t, "local_epochs", "train.local_epochs");
  c.train.shrink_lambda = get<double>(t, "shrink_lambda", "train.shrink_lambda");
  c.train.prox_mu = get<double>(t, "prox_mu", "train.prox_mu");
  c.train.patience = get<int>(t, "patience", "train.patience");
  c.train.min_delta = get<double>(t, "min_delta", "train.min_delta");

  c.hidden_dim = get<int>(j, "hidden_dim", "hidden_dim");
  c.latent_dim = get<int>(j, "latent_dim", "latent_dim");
  c.global_rounds = get<int>(j, "global_rounds", "global_rounds");
  c.global_patience = get<int>(j, "global_patience", "global_patience");
  c.global_min_delta = get<double>(j, "global_min_delta", "global_min_delta");
  c.repeats = get<int>(j, "repeats", "repeats");
  if (!j["master_seed"].is_number_unsigned())
    throw ConfigError("config: 'master_seed' must be an unsigned integer");
  c.master_seed = j["master_seed"].get<std::uint64_t>();
  c.threshold_quantile = get<double>(j, "threshold_quantile", "threshold_quantile");
  c.threads = get<int>(j, "threads", "threads");
  if (!j["sweep"].is_null()) {
    const json& sw = j["sweep"];
    if (!sw.is_object() || !sw.contains("parameter") || !sw.contains("values"))
      throw ConfigError("config: 'sweep' needs 'parameter' and 'values'");
    c.sweep = SweepConfig{get<std::string>(sw, "parameter", "sweep.parameter"),
                          get<std::vector<double>>(sw, "values", "sweep.values")};
  }
  c.output_dir = get<std::string>(j, "output_dir", "output_dir");
  c.validate();
  return c;
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override '" + assignment + "' has an empty key segment");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  json j = path.empty() ? json::object() : read_json_file(path);
  for (const auto& o : overrides) apply_override(j, o);
  return config_from_json(j);
}

std::string config_hash(const ExperimentConfig& cfg) {
  json j = to_json(cfg);
  j.erase("output_dir");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace fedmse
