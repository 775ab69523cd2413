#pragma once

// Anomaly scorers: reconstruction error (AE) and the stripped-encoder
// centroid distance (SAE-CEN).

#include <optional>
#include <span>
#include <vector>

#include "fedmse/nncore.hpp"

namespace fedmse {

enum class DetectorKind { AE, SAECEN };

const char* to_string(DetectorKind k);
DetectorKind detector_kind_from_string(const std::string& s);

struct CentroidModel {
  Vector centroid;

  bool operator==(const CentroidModel&) const = default;
};

/// Arithmetic mean of the rows.
CentroidModel fit_centroid(const Matrix& latents);

/// Squared L2 reconstruction error.
double score_ae(const Vector& x, const ModelParams& params);

/// q-quantile of `scores` with linear interpolation between order statistics.
double threshold_from_quantile(std::span<const double> scores, double q);

class Detector {
 public:
  /// Reconstruction-error detector over the full autoencoder.
  static Detector make_ae(ModelParams params);

  /// Keeps only the encoder and fits the centroid on the latents of
  /// `normal_train` (already normalized).
  static Detector make_saecen(const ModelParams& params, const Matrix& normal_train);

  /// SAE-CEN detector from parts; the centroid may be absent.
  static Detector from_parts(DetectorKind kind, ModelParams params,
                             std::optional<CentroidModel> centroid);

  DetectorKind kind() const { return kind_; }
  const ModelParams& params() const { return params_; }
  ModelParams& mutable_params() { return params_; }
  const std::optional<CentroidModel>& centroid() const { return centroid_; }
  Eigen::Index input_dim() const { return params_.input_dim(); }

  double score(const Vector& x) const;
  std::vector<double> score_rows(const Matrix& rows) const;
  Matrix latents(const Matrix& rows) const;

 private:
  Detector(DetectorKind kind, ModelParams params, std::optional<CentroidModel> centroid)
      : kind_(kind), params_(std::move(params)), centroid_(std::move(centroid)) {}

  DetectorKind kind_;
  ModelParams params_;
  std::optional<CentroidModel> centroid_;
};

/// Euclidean distance from the encoder output of `x` to the centroid.
double score_saecen(const Vector& x, const Detector& detector);

}  // namespace fedmse
