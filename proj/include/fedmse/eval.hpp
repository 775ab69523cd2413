#pragma once

// ROC-AUC, mean/std summaries in the layout of the per-gateway tables, and
// latent export.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fedmse/data.hpp"
#include "fedmse/detector.hpp"
#include "fedmse/federation.hpp"

namespace fedmse {

/// P(anomalous score > normal score) with ties counted half, via midranks.
double roc_auc(std::span<const double> scores, std::span<const Label> labels);

struct MeanStd {
  double mean = 0;
  double std = 0;  // population

  bool operator==(const MeanStd&) const = default;
};

MeanStd mean_std(std::span<const double> values);

struct ScoreSummary {
  double min = 0;
  double median = 0;
  double max = 0;
};

struct GatewayResult {
  int gateway_id = 0;
  double auc = 0;
  std::size_t n_test = 0;
  std::size_t n_anomalous = 0;
  ScoreSummary scores;
};

GatewayResult evaluate_gateway(int gateway_id, std::span<const double> scores,
                               std::span<const Label> labels);

MeanStd summarize_gateways(std::span<const GatewayResult> results);
MeanStd summarize_repeats(std::span<const double> per_seed_means);

/// One seeded run of one model/algorithm pair.
struct RunReport {
  std::string config_hash;
  std::string model;
  std::string algorithm;
  int repeat = 0;
  std::uint64_t seed = 0;
  double initial_dev_mse = 0;
  int best_round = 0;
  std::vector<RoundRecord> rounds;
  std::vector<GatewayResult> gateways;
  MeanStd auc;  // across gateways
};

/// Runs of one model/algorithm pair across repeats.
struct ComboSummary {
  std::string model;
  std::string algorithm;
  std::vector<MeanStd> per_gateway;  // across repeats, per gateway
  MeanStd average;                   // mean of per-gateway means, mean of per-gateway stds
  MeanStd across_gateways;           // mean over repeats of (gateway mean, gateway std)
  MeanStd repeats;                   // mean/std of per-repeat gateway means
};

ComboSummary summarize_combo(std::span<const RunReport> runs);

/// CSV: one row per sample, latent components then label (0 normal, 1 anomalous).
void export_latent(const Detector& detector, const Matrix& data, std::span<const Label> labels,
                   const std::filesystem::path& path);

}  // namespace fedmse
