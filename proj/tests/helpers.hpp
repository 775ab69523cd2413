#pragma once

// Independent oracles and fixtures shared by the unit and acceptance tests.
// The oracles use plain loops and std:: math so they do not share code paths
// with the Eigen implementations under test.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fedmse/data.hpp"
#include "fedmse/nncore.hpp"

namespace fedmse::testing {

inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

/// Glorot init plus non-zero biases so every parameter matters.
inline ModelParams random_params(const Architecture& arch, std::uint64_t seed) {
  ModelParams p = init_autoencoder(arch, seed);
  Rng rng(seed ^ 0x5bd1e995ULL);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for_each_tensor(p, [&](auto& t) {
    if (t.cols() == 1)
      for (Eigen::Index i = 0; i < t.size(); ++i) t(i) = u(rng);
  });
  return p;
}

/// y = act(W x + b) per layer with explicit loops.
inline std::vector<double> naive_stack(const std::vector<DenseLayer<double>>& layers,
                                       std::vector<double> x) {
  for (const auto& l : layers) {
    std::vector<double> y(static_cast<std::size_t>(l.out_dim()));
    for (Eigen::Index o = 0; o < l.out_dim(); ++o) {
      double acc = l.biases(o);
      for (Eigen::Index i = 0; i < l.in_dim(); ++i) acc += l.weights(o, i) * x[static_cast<std::size_t>(i)];
      y[static_cast<std::size_t>(o)] = l.activation == Activation::Tanh ? std::tanh(acc) : acc;
    }
    x = std::move(y);
  }
  return x;
}

inline std::vector<double> row_of(const Matrix& m, Eigen::Index r) {
  std::vector<double> v(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) v[static_cast<std::size_t>(c)] = m(r, c);
  return v;
}

/// Objective by explicit loops: mean ||x - x_hat||^2 + lambda mean ||h||^2
/// + mu/2 ||p - anchor||^2.
inline double naive_objective(const Matrix& batch, const ModelParams& p, double lambda, double mu,
                              const ModelParams* anchor) {
  double recon = 0, shrink = 0;
  for (Eigen::Index r = 0; r < batch.rows(); ++r) {
    const auto x = row_of(batch, r);
    const auto h = naive_stack(p.encoder, x);
    const auto y = naive_stack(p.decoder, h);
    for (std::size_t i = 0; i < x.size(); ++i) recon += (x[i] - y[i]) * (x[i] - y[i]);
    for (double v : h) shrink += v * v;
  }
  const double n = static_cast<double>(batch.rows());
  double value = recon / n + lambda * shrink / n;
  if (mu > 0) {
    const Vector a = flatten(p), b = flatten(*anchor);
    double d = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i) d += (a(i) - b(i)) * (a(i) - b(i));
    value += mu / 2 * d;
  }
  return value;
}

/// Sum_i w_i x_i / Sum w, entry by entry over flattened parameters.
inline std::vector<double> naive_weighted_mean(const std::vector<ModelParams>& models,
                                               const std::vector<double>& w) {
  double total = 0;
  for (double v : w) total += v;
  const auto size = static_cast<std::size_t>(flatten(models.front()).size());
  std::vector<double> out(size, 0.0);
  for (std::size_t m = 0; m < models.size(); ++m) {
    const Vector f = flatten(models[m]);
    for (std::size_t i = 0; i < size; ++i) out[i] += w[m] / total * f(static_cast<Eigen::Index>(i));
  }
  return out;
}

/// Mean over rows of the squared reconstruction error, by loops.
inline double naive_mse(const ModelParams& p, const Matrix& data) {
  double s = 0;
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    const auto x = row_of(data, r);
    const auto y = naive_stack(p.decoder, naive_stack(p.encoder, x));
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  }
  return s / static_cast<double>(data.rows());
}

/// P(anomalous > normal) + 0.5 P(tie) over all pairs.
inline double brute_auc(const std::vector<double>& scores, const std::vector<Label>& labels) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != Label::Anomalous) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != Label::Normal) continue;
      pairs += 1;
      if (scores[i] > scores[j]) wins += 1;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

inline double max_abs_diff(const ModelParams& a, const std::vector<double>& b) {
  const Vector f = flatten(a);
  double m = 0;
  for (Eigen::Index i = 0; i < f.size(); ++i) m = std::max(m, std::abs(f(i) - b[static_cast<std::size_t>(i)]));
  return m;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::path(FEDMSE_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

/// Small synthetic set for fast end-to-end tests.
inline SyntheticSpec small_synthetic() {
  SyntheticSpec s;
  s.device_types = 9;
  s.dims = 8;
  s.normals_per_type = 300;
  s.anomalies_per_type = 100;
  return s;
}

}  // namespace fedmse::testing
