#pragma once

// Feature ingestion, z-score normalization, Dirichlet non-IID partitioning,
// per-gateway splits and the synthetic traffic generator.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedmse/nncore.hpp"
#include "fedmse/random.hpp"

namespace fedmse {

enum class Label : std::uint8_t { Normal = 0, Anomalous = 1 };

using RowIndex = Eigen::Index;
using RowSet = std::vector<RowIndex>;

struct LabeledDataset {
  Matrix features;  // rows x features
  std::vector<Label> labels;
  std::vector<int> device_type;

  Eigen::Index rows() const { return features.rows(); }
  Eigen::Index dims() const { return features.cols(); }

  /// Throws InputError when the parallel arrays disagree.
  void check() const;
  LabeledDataset subset(std::span<const RowIndex> rows) const;
  Matrix feature_rows(std::span<const RowIndex> rows) const;
  void append(const LabeledDataset& other);
  std::vector<int> device_types() const;  // sorted, unique
};

// --------------------------------------------------------------------------
// CSV ingestion

/// How one feature file maps onto the dataset. Either `label` is set (the
/// whole file has one label, N-BaIoT style) or `label_column` names a column
/// whose value 0/normal/benign means Normal and anything else Anomalous.
struct FileSchema {
  std::filesystem::path path;
  int device_type = 0;
  std::optional<Label> label;
  std::string label_column;
  std::vector<std::string> ignore_columns;
};

struct LoadResult {
  LabeledDataset data;
  std::vector<std::string> feature_names;
  std::size_t rejected_rows = 0;  // rows with non-finite values
};

LoadResult load_csv(const std::filesystem::path& path, const FileSchema& schema);

/// Reads every column of a headed numeric CSV. Zero data rows is allowed;
/// a non-numeric or non-finite cell is an InputError naming the line.
Matrix read_feature_matrix(const std::filesystem::path& path,
                           std::vector<std::string>* names = nullptr);

/// Reads a JSON manifest:
///   {"files": [{"path": "...", "device_type": 0, "label": "normal"}, ...]}
/// Relative paths resolve against the manifest's directory. `role`
/// ("normal"/"attack") is accepted as an alias for `label`.
std::vector<FileSchema> load_manifest(const std::filesystem::path& path);

/// Loads every manifest entry, keeping a random `fraction` of each file's rows.
LoadResult load_manifest_dataset(const std::filesystem::path& manifest, double fraction,
                                 std::uint64_t seed);

// --------------------------------------------------------------------------
// Normalization

inline constexpr double kSigmaFloor = 1e-8;

struct NormalizerStats {
  Vector mean;
  Vector std;  // population std, clamped to kSigmaFloor

  Vector apply(const Vector& x) const;
  Matrix apply(const Matrix& x) const;
  Matrix invert(const Matrix& z) const;

  bool operator==(const NormalizerStats&) const = default;
};

NormalizerStats zscore_fit(const Matrix& train);
Vector zscore_apply(const Vector& x, const NormalizerStats& stats);

// --------------------------------------------------------------------------
// Partitioning

inline constexpr int kMaxPartitionRedraws = 100;

struct PartitionOptions {
  int min_rows_per_gateway = 10;
  int max_redraws = kMaxPartitionRedraws;
  std::vector<int> excluded_device_types;  // held out of training entirely
};

struct PartitionPlan {
  int n_gateways = 0;
  double alpha = 0;
  std::vector<int> device_types;  // row labels of `proportions` / `counts`
  Matrix proportions;             // device_types x gateways, rows sum to 1
  Matrix counts;                  // realized row counts, same layout
  std::vector<int> assignment;    // per dataset row; -1 = not partitioned
  double realized_js = 0;         // mean pairwise JS between gateways
  double js_vs_pooled = 0;        // mean JS of each gateway vs pooled mix
  int redraws = 0;

  RowSet gateway_rows(int gateway) const;
};

/// Partitions the Normal rows of every non-excluded device type across
/// gateways with per-type Dirichlet(alpha) proportions and largest-remainder
/// count allocation. Re-draws while any gateway ends below
/// `min_rows_per_gateway` rows.
PartitionPlan dirichlet_partition(const LabeledDataset& dataset, int n_gateways, double alpha,
                                  Rng& rng, const PartitionOptions& options = {});

/// Base-2 Jensen-Shannon divergence of two probability vectors, in [0, 1].
double jensen_shannon(const Vector& p, const Vector& q);

/// Mean pairwise JS between the per-gateway device-type distributions of a
/// (device_types x gateways) count matrix.
double jensen_shannon_noniidness(const Matrix& counts);

/// Mean over gateways of JS(gateway mix, pooled mix).
double js_vs_pooled(const Matrix& counts);

/// Count matrix realized by an assignment.
Matrix assignment_counts(const LabeledDataset& dataset, std::span<const int> assignment,
                         int n_gateways, std::span<const int> device_types);

/// Distributes `total` over `weights` (need not be normalized) so the parts
/// sum exactly to `total`; ties in the remainder go to the lower index.
std::vector<std::size_t> largest_remainder(std::span<const double> weights, std::size_t total);

// --------------------------------------------------------------------------
// Local splits and test sets

struct LocalSplit {
  RowSet train;     // 40%
  RowSet val;       // 10%
  RowSet dev_pool;  // 40%
  RowSet test_add;  // 10%
};

inline constexpr std::array<double, 4> kSplitFractions = {0.4, 0.1, 0.4, 0.1};

LocalSplit split_local(std::span<const RowIndex> rows, Rng& rng);

struct TestSetOptions {
  double anomaly_ratio = 1.0;         // anomalies per local test normal
  std::vector<int> new_device_types;  // held out of training
  double new_device_fraction = 0.5;   // new-device rows per local test normal
};

/// Per gateway: local test normals + anomalies of the gateway's device types
/// (proportional to its training mix) + normal and anomalous rows of unseen
/// device types. Returns dataset row indices per gateway.
std::vector<RowSet> build_test_sets(const LabeledDataset& dataset, const PartitionPlan& plan,
                                    const std::vector<LocalSplit>& splits,
                                    const TestSetOptions& options, Rng& rng);

// --------------------------------------------------------------------------
// Synthetic data

struct SyntheticSpec {
  int device_types = 9;
  int dims = 16;
  int normals_per_type = 10000;
  int anomalies_per_type = 2500;
  double separation = 4.0;  // anomaly shift in normal-cluster std units
  int rank = 0;             // latent factors per type; 0 = max(1, dims / 4)

  bool operator==(const SyntheticSpec&) const = default;
};

/// Per device type, normals come from a low-rank Gaussian cluster
/// mean + loadings * z + noise. Anomalies of that type are the same cluster
/// shifted along a random unit direction by `separation` times the cluster's
/// largest standard deviation, and widened 1.5x.
LabeledDataset synth_generate(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace fedmse
