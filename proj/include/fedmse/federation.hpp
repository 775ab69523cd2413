#pragma once

// Federated round protocol: gateway selection, local updates, FedAvg /
// FedProx / MSEAvg aggregation and global early stopping on the server's
// development dataset.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedmse/data.hpp"
#include "fedmse/detector.hpp"
#include "fedmse/nncore.hpp"

namespace fedmse {

enum class Aggregation { FedAvg, FedProx, MSEAvg };

const char* to_string(Aggregation a);
Aggregation aggregation_from_string(const std::string& s);

/// Floor applied to a development MSE before it is inverted.
inline constexpr double kMseFloor = 1e-12;

/// One simulated gateway. Every matrix is already z-scored with `normalizer`.
struct GatewayState {
  int id = 0;
  Matrix train;
  Matrix val;
  Matrix dev_pool;
  Matrix test;
  std::vector<Label> test_labels;
  NormalizerStats normalizer;
  ModelParams local_params;

  std::size_t sample_count() const { return static_cast<std::size_t>(train.rows()); }
};

struct AggregationWeights {
  std::vector<double> alpha;  // unnormalized
  std::vector<double> mse;    // MSEAvg only
};

struct RoundRecord {
  int round = 0;  // 1-based
  std::vector<int> selected;
  std::vector<double> weights;  // normalized aggregation weights, selection order
  double dev_mse = 0;           // reconstruction MSE of the new global model
  double dev_objective = 0;     // the model's own training loss on dev
  double wall_time_s = 0;
};

/// Uniform subset of size max(1, round(ratio * n_total)), sorted ascending.
std::vector<int> select_gateways(int n_total, double ratio, Rng& rng);

/// k = smallest dev pool; k rows sampled without replacement from each
/// gateway, concatenated in gateway order.
Matrix assemble_dev_dataset(std::span<const GatewayState> gateways, Rng& rng);

/// Sum_i (w_i / Sum w) * W_i, computed relative to the first model so that
/// identical inputs reproduce it exactly.
ModelParams weighted_average(std::span<const ModelParams> models, std::span<const double> weights);

ModelParams fedavg_aggregate(std::span<const ModelParams> models,
                             std::span<const std::size_t> sizes);

/// Reconstruction MSE on `dev` (no shrink term), floored at kMseFloor.
double mse_on_dev(const ModelParams& model, const Matrix& dev);

struct MseAvgResult {
  ModelParams global;
  AggregationWeights weights;
};

/// alpha_i = 1 / max(MSE_i, floor); global = Sum alpha_i W_i / Sum alpha_i.
MseAvgResult mseavg_aggregate(std::span<const ModelParams> models, const Matrix& dev);

struct FederationConfig {
  DetectorKind model = DetectorKind::SAECEN;
  Aggregation algorithm = Aggregation::MSEAvg;
  TrainConfig train;  // prox_mu is applied only under FedProx
  int global_rounds = 20;
  double gateway_ratio = 0.5;
  int global_patience = 3;
  double global_min_delta = 1e-6;
  int threads = 1;

  void validate() const;
  /// Local objective for this model / algorithm pair.
  TrainConfig local_train_config() const;
};

struct TrainingResult {
  ModelParams global;  // best on dev
  double initial_dev_mse = 0;
  double initial_dev_objective = 0;
  int best_round = 0;  // 0 = initial params
  bool stopped_early = false;
  std::vector<RoundRecord> history;
};

/// Runs the rounds; every gateway's local_params end at the final global
/// model. RNG streams are derived from (run_seed, gateway, round).
TrainingResult run_training(const FederationConfig& cfg, std::span<GatewayState> gateways,
                            const Matrix& dev, const ModelParams& init, std::uint64_t run_seed);

/// Builds each gateway's detector from the final global model.
std::vector<Detector> build_detectors(DetectorKind kind, const ModelParams& global,
                                      std::span<const GatewayState> gateways);

}  // namespace fedmse
