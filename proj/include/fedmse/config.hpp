#pragma once

// Experiment configuration: JSON schema with defaults, dotted-key
// overrides, validation and a stable hash.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedmse/data.hpp"
#include "fedmse/detector.hpp"
#include "fedmse/federation.hpp"
#include "fedmse/nncore.hpp"

namespace fedmse {

struct DataConfig {
  std::string source = "synthetic";  // synthetic | manifest
  std::string manifest;
  double subsample = 1.0;  // per-file row fraction for manifest sources
  SyntheticSpec synthetic;
  double anomaly_ratio = 1.0;
  std::vector<int> new_device_types;
  double new_device_fraction = 0.5;

  bool operator==(const DataConfig&) const = default;
};

struct SweepConfig {
  std::string parameter;  // gateway_ratio | n_gateways
  std::vector<double> values;

  bool operator==(const SweepConfig&) const = default;
};

struct ExperimentConfig {
  DataConfig data;
  int n_gateways = 10;
  double gateway_ratio = 0.5;
  double dirichlet_alpha = 0.1995;
  std::vector<DetectorKind> models = {DetectorKind::AE, DetectorKind::SAECEN};
  std::vector<Aggregation> algorithms = {Aggregation::FedAvg, Aggregation::FedProx,
                                         Aggregation::MSEAvg};
  TrainConfig train = default_train();
  int hidden_dim = 0;  // 0 = automatic
  int latent_dim = 0;  // 0 = floor(1 + sqrt(n))
  int global_rounds = 20;
  int global_patience = 3;
  double global_min_delta = 1e-6;
  int repeats = 5;
  std::uint64_t master_seed = 42;
  double threshold_quantile = 0.95;
  int threads = 1;
  std::optional<SweepConfig> sweep;
  std::string output_dir = "out";

  static TrainConfig default_train() {
    TrainConfig t;
    t.prox_mu = 0.001;
    return t;
  }

  /// Throws ConfigError on the first violated constraint.
  void validate() const;

  FederationConfig federation(DetectorKind model, Aggregation algorithm) const;

  bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::json to_json(const ExperimentConfig& cfg);

/// Parses a (possibly partial) config object over the defaults. Unknown keys
/// and wrong types are ConfigErrors. Validates the result.
ExperimentConfig config_from_json(const nlohmann::json& j);

/// Applies "a.b.c=value" to a config object. The value is parsed as JSON when
/// possible and taken as a string otherwise.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// Reads the file (or starts from an empty object when `path` is empty), then
/// applies overrides in order.
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides = {});

/// FNV-1a 64 of the canonical JSON of every field except output_dir, as hex.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace fedmse
