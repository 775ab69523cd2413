#include "fedmse/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

namespace fedmse {

double roc_auc(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) throw InputError("roc_auc: scores and labels differ in length");
  std::size_t n_pos = 0;
  for (Label l : labels) n_pos += l == Label::Anomalous;
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw InputError("roc_auc: both labels are required");
  for (double s : scores)
    if (std::isnan(s)) throw InputError("roc_auc: NaN score");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });

  // Sum of (doubled) midranks of the anomalous samples keeps everything integral.
  std::uint64_t rank_sum2 = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const std::uint64_t midrank2 = (i + 1) + j;  // 2 * mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == Label::Anomalous) rank_sum2 += midrank2;
    i = j;
  }
  // U = rank_sum - n_pos (n_pos + 1) / 2; counts wins plus half-ties.
  const std::uint64_t u2 = rank_sum2 - static_cast<std::uint64_t>(n_pos) * (n_pos + 1);
  return static_cast<double>(u2) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw InputError("mean_std: no values");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / n)};
}

GatewayResult evaluate_gateway(int gateway_id, std::span<const double> scores,
                               std::span<const Label> labels) {
  GatewayResult r;
  r.gateway_id = gateway_id;
  r.auc = roc_auc(scores, labels);
  r.n_test = scores.size();
  r.n_anomalous = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Label::Anomalous));
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  r.scores.min = sorted.front();
  r.scores.max = sorted.back();
  const auto m = sorted.size() / 2;
  r.scores.median = sorted.size() % 2 ? sorted[m] : (sorted[m - 1] + sorted[m]) / 2;
  return r;
}

MeanStd summarize_gateways(std::span<const GatewayResult> results) {
  std::vector<double> aucs;
  for (const auto& r : results) aucs.push_back(r.auc);
  return mean_std(aucs);
}

MeanStd summarize_repeats(std::span<const double> per_seed_means) { return mean_std(per_seed_means); }

ComboSummary summarize_combo(std::span<const RunReport> runs) {
  if (runs.empty()) throw InputError("summarize_combo: no runs");
  ComboSummary s;
  s.model = runs.front().model;
  s.algorithm = runs.front().algorithm;
  const std::size_t n_gw = runs.front().gateways.size();
  std::vector<double> means, stds, gw_means, gw_stds;
  for (std::size_t g = 0; g < n_gw; ++g) {
    std::vector<double> aucs;
    for (const auto& r : runs) {
      if (r.gateways.size() != n_gw) throw InputError("summarize_combo: runs disagree on gateway count");
      aucs.push_back(r.gateways[g].auc);
    }
    s.per_gateway.push_back(mean_std(aucs));
    gw_means.push_back(s.per_gateway.back().mean);
    gw_stds.push_back(s.per_gateway.back().std);
  }
  s.average = {mean_std(gw_means).mean, mean_std(gw_stds).mean};
  for (const auto& r : runs) {
    means.push_back(r.auc.mean);
    stds.push_back(r.auc.std);
  }
  s.across_gateways = {mean_std(means).mean, mean_std(stds).mean};
  s.repeats = summarize_repeats(means);
  return s;
}

void export_latent(const Detector& detector, const Matrix& data, std::span<const Label> labels,
                   const std::filesystem::path& path) {
  if (static_cast<std::size_t>(data.rows()) != labels.size())
    throw InputError("export_latent: one label per row required");
  const Matrix h = detector.latents(data);
  std::ofstream out(path);
  if (!out) throw IoError("export_latent: cannot write " + path.string());
  for (Eigen::Index j = 0; j < h.cols(); ++j) out << "z" << j << ',';
  out << "label\n";
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    for (Eigen::Index j = 0; j < h.cols(); ++j) out << fmt::format("{}", h(i, j)) << ',';
    out << (labels[static_cast<std::size_t>(i)] == Label::Anomalous ? 1 : 0) << '\n';
  }
  if (!out) throw IoError("export_latent: write failed for " + path.string());
}

}  // namespace fedmse
