#include "fedmse/federation.hpp"

#include <algorithm>
#include <chrono>
#include <future>
#include <numeric>

namespace fedmse {

const char* to_string(Aggregation a) {
  switch (a) {
    case Aggregation::FedAvg: return "fedavg";
    case Aggregation::FedProx: return "fedprox";
    case Aggregation::MSEAvg: return "mseavg";
  }
  return "?";
}

Aggregation aggregation_from_string(const std::string& s) {
  if (s == "fedavg" || s == "FedAvg") return Aggregation::FedAvg;
  if (s == "fedprox" || s == "FedProx") return Aggregation::FedProx;
  if (s == "mseavg" || s == "MSEAvg") return Aggregation::MSEAvg;
  throw ConfigError("unknown algorithm '" + s + "' (expected fedavg, fedprox or mseavg)");
}

std::vector<int> select_gateways(int n_total, double ratio, Rng& rng) {
  if (n_total <= 0) throw InputError("select_gateways: no gateways");
  if (!(ratio > 0 && ratio <= 1)) throw ConfigError("select_gateways: ratio must be in (0, 1]");
  const auto k = std::clamp<long>(std::lround(ratio * n_total), 1L, n_total);
  std::vector<int> ids(static_cast<std::size_t>(n_total));
  std::iota(ids.begin(), ids.end(), 0);
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(static_cast<std::size_t>(k));
  std::sort(ids.begin(), ids.end());
  return ids;
}

Matrix assemble_dev_dataset(std::span<const GatewayState> gateways, Rng& rng) {
  if (gateways.empty()) throw InputError("assemble_dev_dataset: no gateways");
  Eigen::Index k = gateways.front().dev_pool.rows();
  for (const auto& g : gateways) {
    if (g.dev_pool.rows() == 0)
      throw InputError("assemble_dev_dataset: gateway " + std::to_string(g.id) +
                       " has an empty development pool");
    k = std::min(k, g.dev_pool.rows());
  }
  const auto dims = gateways.front().dev_pool.cols();
  Matrix dev(k * static_cast<Eigen::Index>(gateways.size()), dims);
  Eigen::Index row = 0;
  for (const auto& g : gateways) {
    if (g.dev_pool.cols() != dims) throw InputError("assemble_dev_dataset: dimension mismatch");
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(g.dev_pool.rows()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    for (Eigen::Index i = 0; i < k; ++i) dev.row(row++) = g.dev_pool.row(idx[static_cast<std::size_t>(i)]);
  }
  return dev;
}

ModelParams weighted_average(std::span<const ModelParams> models, std::span<const double> weights) {
  if (models.empty()) throw InputError("aggregate: no models");
  if (models.size() != weights.size()) throw InputError("aggregate: one weight per model required");
  double total = 0;
  for (double w : weights) {
    if (!(w > 0) || !std::isfinite(w)) throw InputError("aggregate: weights must be finite and > 0");
    total += w;
  }
  for (const auto& m : models)
    if (!same_shape(m, models.front())) throw InputError("aggregate: model shape mismatch");

  const Vector pivot = flatten(models.front());
  Vector acc = Vector::Zero(pivot.size());
  for (std::size_t i = 1; i < models.size(); ++i)
    acc += (weights[i] / total) * (flatten(models[i]) - pivot);
  return unflatten(models.front(), Vector(pivot + acc));
}

ModelParams fedavg_aggregate(std::span<const ModelParams> models,
                             std::span<const std::size_t> sizes) {
  std::vector<double> w(sizes.begin(), sizes.end());
  return weighted_average(models, w);
}

double mse_on_dev(const ModelParams& model, const Matrix& dev) {
  if (dev.rows() == 0) throw InputError("mse_on_dev: empty development set");
  return std::max(ae_loss(dev, model), kMseFloor);
}

MseAvgResult mseavg_aggregate(std::span<const ModelParams> models, const Matrix& dev) {
  if (models.empty()) throw InputError("mseavg: no models");
  for (const auto& m : models)
    if (!same_shape(m, models.front())) throw InputError("mseavg: model shape mismatch");
  MseAvgResult out;
  for (const auto& m : models) {
    const double mse = mse_on_dev(m, dev);
    out.weights.mse.push_back(mse);
    out.weights.alpha.push_back(1.0 / mse);
  }
  out.global = weighted_average(models, out.weights.alpha);
  return out;
}

void FederationConfig::validate() const {
  train.validate();
  if (global_rounds < 0) throw ConfigError("global_rounds must be >= 0");
  if (!(gateway_ratio > 0 && gateway_ratio <= 1)) throw ConfigError("gateway_ratio must be in (0, 1]");
  if (global_patience < 1) throw ConfigError("global_patience must be >= 1");
  if (!(global_min_delta >= 0)) throw ConfigError("global_min_delta must be >= 0");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

TrainConfig FederationConfig::local_train_config() const {
  TrainConfig t = train;
  if (model == DetectorKind::AE) t.shrink_lambda = 0;
  if (algorithm != Aggregation::FedProx) t.prox_mu = 0;
  return t;
}

TrainingResult run_training(const FederationConfig& cfg, std::span<GatewayState> gateways,
                            const Matrix& dev, const ModelParams& init, std::uint64_t run_seed) {
  cfg.validate();
  if (gateways.empty()) throw InputError("run_training: no gateways");
  if (dev.rows() == 0) throw InputError("run_training: empty development set");
  validate_params(init);

  const TrainConfig local_cfg = cfg.local_train_config();
  const double lambda = local_cfg.shrink_lambda;
  const int n = static_cast<int>(gateways.size());

  TrainingResult result;
  result.global = init;
  result.initial_dev_mse = mse_on_dev(init, dev);
  result.initial_dev_objective = sae_loss(dev, init, lambda);
  double best = result.initial_dev_objective;
  ModelParams global = init;
  int stale = 0;

  for (int round = 1; round <= cfg.global_rounds; ++round) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng select_rng(derive_seed(run_seed, Stream::Select, static_cast<std::uint64_t>(round)));
    RoundRecord rec;
    rec.round = round;
    rec.selected = select_gateways(n, cfg.gateway_ratio, select_rng);

    auto local_update = [&](int id) {
      auto& g = gateways[static_cast<std::size_t>(id)];
      const auto seed = derive_seed(run_seed, Stream::LocalTrain, static_cast<std::uint64_t>(g.id),
                                    static_cast<std::uint64_t>(round));
      return train_local(g.train, g.val, global, local_cfg, seed);
    };
    std::vector<ModelParams> locals(rec.selected.size());
    if (cfg.threads > 1) {
      for (std::size_t start = 0; start < rec.selected.size(); start += static_cast<std::size_t>(cfg.threads)) {
        const auto stop = std::min(rec.selected.size(), start + static_cast<std::size_t>(cfg.threads));
        std::vector<std::future<ModelParams>> jobs;
        for (std::size_t i = start; i < stop; ++i)
          jobs.push_back(std::async(std::launch::async, local_update, rec.selected[i]));
        for (std::size_t i = start; i < stop; ++i) locals[i] = jobs[i - start].get();
      }
    } else {
      for (std::size_t i = 0; i < rec.selected.size(); ++i) locals[i] = local_update(rec.selected[i]);
    }
    for (std::size_t i = 0; i < rec.selected.size(); ++i)
      gateways[static_cast<std::size_t>(rec.selected[i])].local_params = locals[i];

    std::vector<double> weights;
    if (cfg.algorithm == Aggregation::MSEAvg) {
      auto agg = mseavg_aggregate(locals, dev);
      global = std::move(agg.global);
      weights = std::move(agg.weights.alpha);
    } else {
      for (int id : rec.selected)
        weights.push_back(static_cast<double>(gateways[static_cast<std::size_t>(id)].sample_count()));
      global = weighted_average(locals, weights);
    }
    const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (double w : weights) rec.weights.push_back(w / wsum);

    rec.dev_mse = mse_on_dev(global, dev);
    rec.dev_objective = sae_loss(dev, global, lambda);
    if (!std::isfinite(rec.dev_mse) || !std::isfinite(rec.dev_objective))
      throw NumericError("run_training: non-finite development loss in round " + std::to_string(round));
    rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(rec);

    if (rec.dev_objective < best - cfg.global_min_delta) {
      best = rec.dev_objective;
      result.global = global;
      result.best_round = round;
      stale = 0;
    } else if (++stale >= cfg.global_patience) {
      result.stopped_early = round < cfg.global_rounds;
      break;
    }
  }

  for (auto& g : gateways) g.local_params = result.global;
  return result;
}

std::vector<Detector> build_detectors(DetectorKind kind, const ModelParams& global,
                                      std::span<const GatewayState> gateways) {
  std::vector<Detector> out;
  out.reserve(gateways.size());
  for (const auto& g : gateways)
    out.push_back(kind == DetectorKind::AE ? Detector::make_ae(global)
                                           : Detector::make_saecen(global, g.train));
  return out;
}

}  // namespace fedmse
