#include "fedmse/data.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fedmse {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// LabeledDataset

void LabeledDataset::check() const {
  const auto n = static_cast<std::size_t>(features.rows());
  if (labels.size() != n || device_type.size() != n)
    throw InputError("dataset: features, labels and device types have different row counts");
}

LabeledDataset LabeledDataset::subset(std::span<const RowIndex> rows) const {
  LabeledDataset out;
  out.features = feature_rows(rows);
  out.labels.reserve(rows.size());
  out.device_type.reserve(rows.size());
  for (RowIndex r : rows) {
    out.labels.push_back(labels[static_cast<std::size_t>(r)]);
    out.device_type.push_back(device_type[static_cast<std::size_t>(r)]);
  }
  return out;
}

Matrix LabeledDataset::feature_rows(std::span<const RowIndex> rows) const {
  Matrix out(static_cast<Eigen::Index>(rows.size()), features.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= features.rows())
      throw InputError("dataset: row index " + std::to_string(rows[i]) + " out of range");
    out.row(static_cast<Eigen::Index>(i)) = features.row(rows[i]);
  }
  return out;
}

void LabeledDataset::append(const LabeledDataset& other) {
  if (features.size() == 0 && features.rows() == 0) {
    *this = other;
    return;
  }
  if (other.dims() != dims())
    throw InputError("dataset: cannot append " + std::to_string(other.dims()) +
                     "-feature rows to a " + std::to_string(dims()) + "-feature dataset");
  Matrix merged(rows() + other.rows(), dims());
  merged << features, other.features;
  features = std::move(merged);
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
  device_type.insert(device_type.end(), other.device_type.begin(), other.device_type.end());
}

std::vector<int> LabeledDataset::device_types() const {
  std::set<int> s(device_type.begin(), device_type.end());
  return {s.begin(), s.end()};
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

enum class Cell { Ok, NonFinite, Bad };

Cell parse_double(const std::string& raw, double& out) {
  const std::string s = trim(raw);
  if (s.empty()) return Cell::NonFinite;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec == std::errc::result_out_of_range) return Cell::NonFinite;
  if (ec != std::errc() || ptr != last) return Cell::Bad;
  return std::isfinite(out) ? Cell::Ok : Cell::NonFinite;
}

Label parse_label_value(const std::string& raw) {
  const std::string s = lower(trim(raw));
  if (s == "0" || s == "normal" || s == "benign" || s == "0.0") return Label::Normal;
  return Label::Anomalous;
}

std::optional<Label> label_from_text(const std::string& s) {
  const std::string v = lower(s);
  if (v == "normal" || v == "benign") return Label::Normal;
  if (v == "anomalous" || v == "attack" || v == "anomaly" || v == "malicious")
    return Label::Anomalous;
  return std::nullopt;
}

}  // namespace

LoadResult load_csv(const fs::path& path, const FileSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("load_csv: cannot open " + path.string());
  if (!schema.label && schema.label_column.empty())
    throw ConfigError("load_csv: " + path.string() + ": schema needs a label or label_column");

  std::string line;
  if (!std::getline(in, line)) throw InputError("load_csv: " + path.string() + ": empty file");
  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = trim(h);

  std::vector<int> feature_cols;
  int label_col = -1;
  LoadResult result;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    const auto& name = header[static_cast<std::size_t>(c)];
    if (!schema.label_column.empty() && name == schema.label_column) {
      label_col = c;
      continue;
    }
    if (std::find(schema.ignore_columns.begin(), schema.ignore_columns.end(), name) !=
        schema.ignore_columns.end())
      continue;
    feature_cols.push_back(c);
    result.feature_names.push_back(name);
  }
  if (!schema.label_column.empty() && label_col < 0)
    throw InputError("load_csv: " + path.string() + ": label column '" + schema.label_column +
                     "' not found");
  if (feature_cols.empty()) throw InputError("load_csv: " + path.string() + ": no feature columns");

  std::vector<double> values;
  std::vector<Label> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw InputError("load_csv: " + path.string() + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " columns, got " +
                       std::to_string(cells.size()));
    bool finite = true;
    const std::size_t mark = values.size();
    for (int c : feature_cols) {
      double v = 0;
      switch (parse_double(cells[static_cast<std::size_t>(c)], v)) {
        case Cell::Ok: values.push_back(v); break;
        case Cell::NonFinite: finite = false; break;
        case Cell::Bad:
          throw InputError("load_csv: " + path.string() + ":" + std::to_string(line_no) +
                           ": column '" + header[static_cast<std::size_t>(c)] +
                           "' is not numeric: '" + cells[static_cast<std::size_t>(c)] + "'");
      }
    }
    if (!finite) {
      values.resize(mark);
      ++result.rejected_rows;
      continue;
    }
    labels.push_back(schema.label ? *schema.label
                                  : parse_label_value(cells[static_cast<std::size_t>(label_col)]));
  }
  if (labels.empty())
    throw InputError("load_csv: " + path.string() + ": no usable rows (" +
                     std::to_string(result.rejected_rows) + " rejected)");

  const auto n_rows = static_cast<Eigen::Index>(labels.size());
  const auto n_cols = static_cast<Eigen::Index>(feature_cols.size());
  result.data.features =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          values.data(), n_rows, n_cols);
  result.data.labels = std::move(labels);
  result.data.device_type.assign(static_cast<std::size_t>(n_rows), schema.device_type);
  return result;
}

Matrix read_feature_matrix(const fs::path& path, std::vector<std::string>* names) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw InputError(path.string() + ": missing header row");
  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = trim(h);
  if (names) *names = header;

  std::vector<double> values;
  std::size_t line_no = 1, rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " columns, got " + std::to_string(cells.size()));
    for (const auto& cell : cells) {
      double v = 0;
      if (parse_double(cell, v) != Cell::Ok)
        throw InputError(path.string() + ":" + std::to_string(line_no) + ": bad value '" + cell + "'");
      values.push_back(v);
    }
    ++rows;
  }
  Matrix out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(header.size()));
  if (rows > 0)
    out = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data(), out.rows(), out.cols());
  return out;
}

std::vector<FileSchema> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("manifest: cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest: " + path.string() + ": " + e.what());
  }
  if (!j.contains("files") || !j["files"].is_array() || j["files"].empty())
    throw ConfigError("manifest: " + path.string() + ": 'files' must be a non-empty array");

  std::vector<FileSchema> out;
  for (const auto& f : j["files"]) {
    FileSchema s;
    if (!f.contains("path")) throw ConfigError("manifest: entry without 'path'");
    s.path = f["path"].get<std::string>();
    if (s.path.is_relative()) s.path = path.parent_path() / s.path;
    s.device_type = f.value("device_type", 0);
    for (const char* key : {"label", "role"}) {
      if (f.contains(key)) {
        auto l = label_from_text(f[key].get<std::string>());
        if (!l) throw ConfigError("manifest: unknown label '" + f[key].get<std::string>() + "'");
        s.label = l;
      }
    }
    s.label_column = f.value("label_column", std::string{});
    if (f.contains("ignore_columns"))
      s.ignore_columns = f["ignore_columns"].get<std::vector<std::string>>();
    out.push_back(std::move(s));
  }
  return out;
}

LoadResult load_manifest_dataset(const fs::path& manifest, double fraction, std::uint64_t seed) {
  if (!(fraction > 0 && fraction <= 1)) throw ConfigError("manifest: subsample fraction must be in (0, 1]");
  const auto files = load_manifest(manifest);
  LoadResult all;
  for (std::size_t i = 0; i < files.size(); ++i) {
    LoadResult part = load_csv(files[i].path, files[i]);
    all.rejected_rows += part.rejected_rows;
    if (all.feature_names.empty()) all.feature_names = part.feature_names;
    if (fraction < 1) {
      Rng rng(derive_seed(seed, Stream::Subsample, i));
      RowSet idx(static_cast<std::size_t>(part.data.rows()));
      std::iota(idx.begin(), idx.end(), RowIndex{0});
      std::shuffle(idx.begin(), idx.end(), rng);
      const auto keep = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size()))));
      idx.resize(keep);
      std::sort(idx.begin(), idx.end());
      part.data = part.data.subset(idx);
    }
    all.data.append(part.data);
  }
  return all;
}

// ---------------------------------------------------------------------------
// Normalization

Vector NormalizerStats::apply(const Vector& x) const {
  if (x.size() != mean.size())
    throw InputError("zscore: expected " + std::to_string(mean.size()) + " features, got " +
                     std::to_string(x.size()));
  return ((x - mean).array() / std.array()).matrix();
}

Matrix NormalizerStats::apply(const Matrix& x) const {
  if (x.cols() != mean.size())
    throw InputError("zscore: expected " + std::to_string(mean.size()) + " features, got " +
                     std::to_string(x.cols()));
  Matrix z = x.rowwise() - mean.transpose();
  return (z.array().rowwise() / std.transpose().array()).matrix();
}

Matrix NormalizerStats::invert(const Matrix& z) const {
  Matrix x = (z.array().rowwise() * std.transpose().array()).matrix();
  return x.rowwise() + mean.transpose();
}

NormalizerStats zscore_fit(const Matrix& train) {
  if (train.rows() == 0) throw InputError("zscore_fit: empty training set");
  if (train.rows() < 2) throw InputError("zscore_fit: need at least 2 rows");
  NormalizerStats s;
  s.mean = train.colwise().mean().transpose();
  const Matrix centered = train.rowwise() - s.mean.transpose();
  s.std = (centered.array().square().colwise().sum() / static_cast<double>(train.rows()))
              .sqrt()
              .transpose()
              .matrix();
  s.std = s.std.cwiseMax(kSigmaFloor);
  return s;
}

Vector zscore_apply(const Vector& x, const NormalizerStats& stats) { return stats.apply(x); }

// ---------------------------------------------------------------------------
// Partitioning

std::vector<std::size_t> largest_remainder(std::span<const double> weights, std::size_t total) {
  if (weights.empty()) throw InputError("largest_remainder: no weights");
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(sum > 0)) throw InputError("largest_remainder: weights must have a positive sum");
  std::vector<std::size_t> out(weights.size());
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = weights[i] / sum * static_cast<double>(total);
    out[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += out[i];
    rem.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(rem.begin(), rem.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) out[rem[k % rem.size()].second] += 1;
  return out;
}

namespace {

double entropy2(const Vector& p) {
  double h = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p[i] > 0) h -= p[i] * std::log2(p[i]);
  return h;
}

Vector normalized_column(const Matrix& counts, Eigen::Index col) {
  const double total = counts.col(col).sum();
  if (!(total > 0))
    throw InputError("jensen_shannon: gateway " + std::to_string(col) + " holds no rows");
  return counts.col(col) / total;
}

Vector draw_dirichlet(int n, double alpha, Rng& rng) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  Vector p(n);
  for (int attempt = 0;; ++attempt) {
    for (int j = 0; j < n; ++j) p[j] = gamma(rng);
    const double s = p.sum();
    if (s > 0) return p / s;
    // Tiny alpha can underflow every draw to zero; fall back to a one-hot.
    if (attempt > 8) {
      p.setZero();
      p[std::uniform_int_distribution<int>(0, n - 1)(rng)] = 1.0;
      return p;
    }
  }
}

}  // namespace

double jensen_shannon(const Vector& p, const Vector& q) {
  if (p.size() != q.size()) throw InputError("jensen_shannon: length mismatch");
  const Vector m = (p + q) / 2.0;
  const double js = entropy2(m) - (entropy2(p) + entropy2(q)) / 2.0;
  return std::clamp(js, 0.0, 1.0);
}

double jensen_shannon_noniidness(const Matrix& counts) {
  const Eigen::Index g = counts.cols();
  if (g < 2) throw InputError("jensen_shannon: need at least 2 gateways");
  std::vector<Vector> mix;
  for (Eigen::Index j = 0; j < g; ++j) mix.push_back(normalized_column(counts, j));
  double sum = 0;
  std::size_t pairs = 0;
  for (Eigen::Index a = 0; a < g; ++a)
    for (Eigen::Index b = a + 1; b < g; ++b, ++pairs)
      sum += jensen_shannon(mix[static_cast<std::size_t>(a)], mix[static_cast<std::size_t>(b)]);
  return sum / static_cast<double>(pairs);
}

double js_vs_pooled(const Matrix& counts) {
  const Eigen::Index g = counts.cols();
  if (g < 1) throw InputError("jensen_shannon: no gateways");
  const Vector pooled_counts = counts.rowwise().sum();
  const Vector pooled = pooled_counts / pooled_counts.sum();
  double sum = 0;
  for (Eigen::Index j = 0; j < g; ++j) sum += jensen_shannon(normalized_column(counts, j), pooled);
  return sum / static_cast<double>(g);
}

Matrix assignment_counts(const LabeledDataset& dataset, std::span<const int> assignment,
                         int n_gateways, std::span<const int> device_types) {
  if (assignment.size() != static_cast<std::size_t>(dataset.rows()))
    throw InputError("assignment_counts: assignment length does not match dataset");
  std::map<int, Eigen::Index> type_row;
  for (std::size_t k = 0; k < device_types.size(); ++k)
    type_row[device_types[k]] = static_cast<Eigen::Index>(k);
  Matrix counts = Matrix::Zero(static_cast<Eigen::Index>(device_types.size()), n_gateways);
  for (std::size_t r = 0; r < assignment.size(); ++r) {
    const int g = assignment[r];
    if (g < 0) continue;
    if (g >= n_gateways) throw InputError("assignment_counts: gateway id out of range");
    auto it = type_row.find(dataset.device_type[r]);
    if (it == type_row.end()) throw InputError("assignment_counts: unknown device type");
    counts(it->second, g) += 1;
  }
  return counts;
}

RowSet PartitionPlan::gateway_rows(int gateway) const {
  RowSet out;
  for (std::size_t r = 0; r < assignment.size(); ++r)
    if (assignment[r] == gateway) out.push_back(static_cast<RowIndex>(r));
  return out;
}

PartitionPlan dirichlet_partition(const LabeledDataset& dataset, int n_gateways, double alpha,
                                  Rng& rng, const PartitionOptions& options) {
  dataset.check();
  if (n_gateways < 2) throw ConfigError("dirichlet_partition: need at least 2 gateways");
  if (!(alpha > 0)) throw ConfigError("dirichlet_partition: alpha must be > 0");

  // Normal rows grouped by device type, in row order.
  std::map<int, RowSet> by_type;
  for (RowIndex r = 0; r < dataset.rows(); ++r) {
    const auto i = static_cast<std::size_t>(r);
    if (dataset.labels[i] != Label::Normal) continue;
    const int t = dataset.device_type[i];
    if (std::find(options.excluded_device_types.begin(), options.excluded_device_types.end(), t) !=
        options.excluded_device_types.end())
      continue;
    by_type[t].push_back(r);
  }
  if (by_type.empty()) throw InputError("dirichlet_partition: no normal rows to partition");

  PartitionPlan plan;
  plan.n_gateways = n_gateways;
  plan.alpha = alpha;
  for (const auto& [t, rows] : by_type) plan.device_types.push_back(t);
  const auto n_types = static_cast<Eigen::Index>(plan.device_types.size());

  for (int attempt = 0;; ++attempt) {
    plan.proportions.resize(n_types, n_gateways);
    plan.counts = Matrix::Zero(n_types, n_gateways);
    plan.assignment.assign(static_cast<std::size_t>(dataset.rows()), -1);

    Eigen::Index k = 0;
    for (const auto& [t, rows] : by_type) {
      const Vector p = draw_dirichlet(n_gateways, alpha, rng);
      plan.proportions.row(k) = p.transpose();
      const std::vector<double> w(p.data(), p.data() + p.size());
      const auto alloc = largest_remainder(w, rows.size());

      RowSet shuffled = rows;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      std::size_t pos = 0;
      for (int g = 0; g < n_gateways; ++g) {
        const auto n = alloc[static_cast<std::size_t>(g)];
        for (std::size_t i = 0; i < n; ++i)
          plan.assignment[static_cast<std::size_t>(shuffled[pos++])] = g;
        plan.counts(k, g) = static_cast<double>(n);
      }
      ++k;
    }

    const Vector per_gateway = plan.counts.colwise().sum().transpose();
    if (per_gateway.minCoeff() >= options.min_rows_per_gateway) {
      plan.redraws = attempt;
      break;
    }
    if (attempt + 1 >= options.max_redraws)
      throw InputError("dirichlet_partition: a gateway received fewer than " +
                       std::to_string(options.min_rows_per_gateway) + " rows after " +
                       std::to_string(options.max_redraws) + " draws (alpha=" +
                       std::to_string(alpha) + ")");
  }

  // Measured on the realized assignment, not on the sampled proportions.
  const Matrix realized =
      assignment_counts(dataset, plan.assignment, n_gateways, plan.device_types);
  plan.realized_js = jensen_shannon_noniidness(realized);
  plan.js_vs_pooled = js_vs_pooled(realized);
  return plan;
}

// ---------------------------------------------------------------------------
// Splits and test sets

LocalSplit split_local(std::span<const RowIndex> rows, Rng& rng) {
  if (rows.size() < 10)
    throw InputError("split_local: need at least 10 rows, got " + std::to_string(rows.size()));
  const auto sizes = largest_remainder(kSplitFractions, rows.size());
  RowSet shuffled(rows.begin(), rows.end());
  std::shuffle(shuffled.begin(), shuffled.end(), rng);

  LocalSplit s;
  auto it = shuffled.begin();
  for (auto [part, n] : {std::pair{&s.train, sizes[0]}, std::pair{&s.val, sizes[1]},
                         std::pair{&s.dev_pool, sizes[2]}, std::pair{&s.test_add, sizes[3]}}) {
    part->assign(it, it + static_cast<std::ptrdiff_t>(n));
    it += static_cast<std::ptrdiff_t>(n);
  }
  return s;
}

namespace {

/// Samples up to `n` rows without replacement.
RowSet sample_rows(const RowSet& pool, std::size_t n, Rng& rng) {
  RowSet copy = pool;
  std::shuffle(copy.begin(), copy.end(), rng);
  copy.resize(std::min(n, copy.size()));
  return copy;
}

}  // namespace

std::vector<RowSet> build_test_sets(const LabeledDataset& dataset, const PartitionPlan& plan,
                                    const std::vector<LocalSplit>& splits,
                                    const TestSetOptions& options, Rng& rng) {
  dataset.check();
  if (splits.size() != static_cast<std::size_t>(plan.n_gateways))
    throw InputError("build_test_sets: one split per gateway required");
  if (!(options.anomaly_ratio > 0))
    throw ConfigError("build_test_sets: anomaly_ratio must be > 0 (AUC needs anomalies)");

  std::map<int, RowSet> anomalies_by_type;
  RowSet new_normals, new_anomalies;
  const auto is_new = [&](int t) {
    return std::find(options.new_device_types.begin(), options.new_device_types.end(), t) !=
           options.new_device_types.end();
  };
  for (RowIndex r = 0; r < dataset.rows(); ++r) {
    const auto i = static_cast<std::size_t>(r);
    const int t = dataset.device_type[i];
    if (is_new(t)) {
      (dataset.labels[i] == Label::Normal ? new_normals : new_anomalies).push_back(r);
    } else if (dataset.labels[i] == Label::Anomalous) {
      anomalies_by_type[t].push_back(r);
    }
  }
  if (anomalies_by_type.empty() && new_anomalies.empty())
    throw InputError("build_test_sets: anomaly pool is empty; AUC would be undefined");
  if (!options.new_device_types.empty() && new_normals.empty() && new_anomalies.empty())
    throw InputError("build_test_sets: no rows for the configured new device types");

  std::vector<RowSet> tests;
  for (int g = 0; g < plan.n_gateways; ++g) {
    const auto& split = splits[static_cast<std::size_t>(g)];
    RowSet test = split.test_add;
    const auto n_local = static_cast<double>(split.test_add.size());

    // Anomalies follow the gateway's training device mix.
    std::vector<double> mix;
    std::vector<int> types;
    for (Eigen::Index k = 0; k < plan.counts.rows(); ++k) {
      const int t = plan.device_types[static_cast<std::size_t>(k)];
      if (plan.counts(k, g) > 0 && anomalies_by_type.count(t)) {
        mix.push_back(plan.counts(k, g));
        types.push_back(t);
      }
    }
    const auto n_anom = static_cast<std::size_t>(std::llround(options.anomaly_ratio * n_local));
    if (!types.empty() && n_anom > 0) {
      // Every training device type gets at least one anomaly when the budget allows.
      const std::size_t floor_each = n_anom >= types.size() ? 1 : 0;
      auto alloc = largest_remainder(mix, n_anom - floor_each * types.size());
      for (auto& a : alloc) a += floor_each;
      for (std::size_t i = 0; i < types.size(); ++i) {
        const auto picked = sample_rows(anomalies_by_type[types[i]], alloc[i], rng);
        test.insert(test.end(), picked.begin(), picked.end());
      }
    }

    if (!options.new_device_types.empty()) {
      const auto n_new =
          static_cast<std::size_t>(std::llround(options.new_device_fraction * n_local));
      const auto n_new_anom =
          static_cast<std::size_t>(std::llround(options.anomaly_ratio * static_cast<double>(n_new)));
      const auto a = sample_rows(new_normals, n_new, rng);
      const auto b = sample_rows(new_anomalies, n_new_anom, rng);
      test.insert(test.end(), a.begin(), a.end());
      test.insert(test.end(), b.begin(), b.end());
    }

    bool has_normal = false, has_anomaly = false;
    for (RowIndex r : test)
      (dataset.labels[static_cast<std::size_t>(r)] == Label::Normal ? has_normal : has_anomaly) = true;
    if (!has_normal || !has_anomaly)
      throw InputError("build_test_sets: gateway " + std::to_string(g) +
                       " test set lacks one of the two labels; AUC would be undefined");
    tests.push_back(std::move(test));
  }
  return tests;
}

// ---------------------------------------------------------------------------
// Synthetic generator

LabeledDataset synth_generate(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.dims < 2) throw ConfigError("synthetic: dims must be >= 2");
  if (spec.device_types < 1) throw ConfigError("synthetic: device_types must be >= 1");
  if (spec.normals_per_type < 0 || spec.anomalies_per_type < 0)
    throw ConfigError("synthetic: sample counts must be >= 0");
  if (!(spec.separation > 0)) throw ConfigError("synthetic: separation must be > 0");

  const int dims = spec.dims;
  const int rank = spec.rank > 0 ? std::min(spec.rank, dims) : std::max(1, dims / 4);
  constexpr double kMeanSpread = 1.0;
  constexpr double kNoise = 0.3;
  constexpr double kAnomalyWidth = 1.5;

  const auto total = static_cast<Eigen::Index>(spec.device_types) *
                     (spec.normals_per_type + spec.anomalies_per_type);
  LabeledDataset out;
  out.features.resize(total, dims);
  out.labels.reserve(static_cast<std::size_t>(total));
  out.device_type.reserve(static_cast<std::size_t>(total));

  std::normal_distribution<double> normal(0.0, 1.0);
  auto gaussian = [&](Rng& rng, Eigen::Index r, Eigen::Index c) {
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) m(i, j) = normal(rng);
    return m;
  };

  // Factor loadings shared by all device types; each type rescales them.
  Rng shared_rng(derive_seed(seed, Stream::Synthetic, 0, 1));
  const Matrix shared = gaussian(shared_rng, dims, rank) / std::sqrt(double(rank));

  Eigen::Index row = 0;
  for (int t = 0; t < spec.device_types; ++t) {
    Rng rng(derive_seed(seed, Stream::Synthetic, static_cast<std::uint64_t>(t)));
    normal.reset();

    const Vector mean = gaussian(rng, dims, 1) * kMeanSpread;
    Vector scale(dims);
    for (int d = 0; d < dims; ++d) scale[d] = std::exp(0.5 * normal(rng));
    const Matrix loadings = scale.asDiagonal() * shared;
    // Anomalies move within the span of the correlated factors.
    Vector direction = loadings * gaussian(rng, rank, 1);
    direction.normalize();

    // Largest std of the normal cluster, so the shift clears every axis.
    const Eigen::JacobiSVD<Matrix> svd(loadings);
    const double top = svd.singularValues()(0);
    const double sigma_max = std::sqrt(top * top + kNoise * kNoise);
    const Vector shift = direction * (spec.separation * sigma_max);

    auto emit = [&](int count, Label label) {
      const double width = label == Label::Normal ? 1.0 : kAnomalyWidth;
      for (int i = 0; i < count; ++i, ++row) {
        const Vector z = gaussian(rng, rank, 1);
        const Vector noise = gaussian(rng, dims, 1) * kNoise;
        Vector x = mean + width * (loadings * z + noise);
        if (label == Label::Anomalous) x += shift;
        out.features.row(row) = x.transpose();
        out.labels.push_back(label);
        out.device_type.push_back(t);
      }
    };
    emit(spec.normals_per_type, Label::Normal);
    emit(spec.anomalies_per_type, Label::Anomalous);
  }
  return out;
}

}  // namespace fedmse
