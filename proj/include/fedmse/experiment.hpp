#pragma once

// Experiment driver behind the CLI: data preparation, seeded runs of every
// model x algorithm pair, persistence and the table reports.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedmse/config.hpp"
#include "fedmse/data.hpp"
#include "fedmse/eval.hpp"
#include "fedmse/federation.hpp"

namespace fedmse {

/// run_seed = hash(master_seed, repeat_index).
std::uint64_t run_seed(std::uint64_t master_seed, int repeat);

/// Everything fixed by (config, master_seed) before training starts.
struct PreparedData {
  LabeledDataset dataset;
  std::size_t rejected_rows = 0;
  PartitionPlan plan;
  std::vector<LocalSplit> splits;
  std::vector<RowSet> tests;
  std::vector<GatewayState> gateways;  // normalized, local_params empty
};

/// Loads or generates the data, partitions it, splits every gateway, builds
/// the test sets and fits the per-gateway normalizers. Fails before any
/// training when the test sets cannot carry both labels.
PreparedData prepare_data(const ExperimentConfig& cfg);

Architecture architecture_for(const ExperimentConfig& cfg, int input_dim);

struct RunOutput {
  RunReport report;
  ModelParams global;
  std::vector<Detector> detectors;
};

/// One seeded run of one model/algorithm pair on prepared data.
RunOutput run_once(const ExperimentConfig& cfg, const PreparedData& data, DetectorKind model,
                   Aggregation algorithm, int repeat);

struct ExperimentResult {
  std::string config_hash;
  std::vector<std::vector<RunReport>> runs;  // per combo, per repeat
  std::vector<ComboSummary> combos;
  double realized_js = 0;
  double js_vs_pooled = 0;
};

/// Runs every combo for every repeat. `on_run` (optional) sees each output.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const PreparedData& data,
                                const std::function<void(const RunOutput&)>& on_run = {});

/// Machine-readable report; deterministic (no wall times).
nlohmann::json report_to_json(const ExperimentConfig& cfg, const ExperimentResult& result);

/// Aligned table: rows = gateways + Average, columns = model x algorithm,
/// cells = AUC % mean+-std across repeats.
std::string render_table(const nlohmann::json& report);

/// Rows = sweep values, columns = model x algorithm.
std::string render_sweep_table(const nlohmann::json& sweep_report);

// --------------------------------------------------------------------------
// Commands. Each writes into `out_dir` under an exclusive lock file.

struct PartitionOutput {
  PartitionPlan plan;
  std::filesystem::path assignment_csv;
  std::filesystem::path metadata_json;
};

PartitionOutput cmd_partition(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// Writes config.json, partition files, report.json, report.txt, timing.json,
/// runs/*.json, models/<model>_<alg>_r<k>.json and detectors for repeat 0.
ExperimentResult cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

struct SweepPoint {
  double value = 0;
  std::optional<ExperimentResult> result;
  std::string error;
};

/// One cmd_train per sweep value (in out_dir/<parameter>_<value>); failures
/// are recorded and the sweep continues. Writes sweep.json and sweep.txt.
std::vector<SweepPoint> cmd_sweep(const ExperimentConfig& cfg, const std::string& parameter,
                                  const std::vector<double>& values,
                                  const std::filesystem::path& out_dir);

/// Scores every row of a raw feature CSV (header required). Output columns:
/// row,score[,verdict]. A verdict is written when a threshold is available
/// (`threshold` overrides the one stored in the model file).
std::size_t cmd_score(const std::filesystem::path& model_path, const std::filesystem::path& input_csv,
                      const std::filesystem::path& output_csv,
                      std::optional<double> threshold = std::nullopt);

/// Re-renders the table from report.json or sweep.json in `out_dir`.
std::string cmd_report(const std::filesystem::path& out_dir);

/// Exclusive `.fedmse.lock` in a directory for the lifetime of the object.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::filesystem::path path_;
};

}  // namespace fedmse
