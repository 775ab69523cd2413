#include "fedmse/detector.hpp"

#include <algorithm>
#include <cmath>

namespace fedmse {

const char* to_string(DetectorKind k) { return k == DetectorKind::AE ? "ae" : "saecen"; }

DetectorKind detector_kind_from_string(const std::string& s) {
  if (s == "ae" || s == "AE" || s == "autoencoder") return DetectorKind::AE;
  if (s == "saecen" || s == "SAECEN" || s == "sae-cen" || s == "SAE-CEN") return DetectorKind::SAECEN;
  throw ConfigError("unknown model '" + s + "' (expected ae or saecen)");
}

CentroidModel fit_centroid(const Matrix& latents) {
  if (latents.rows() == 0) throw InputError("fit_centroid: no latent vectors");
  CentroidModel c{latents.colwise().mean().transpose()};
  if (!c.centroid.allFinite()) throw NumericError("fit_centroid: non-finite centroid");
  return c;
}

double score_ae(const Vector& x, const ModelParams& params) {
  if (x.size() != params.input_dim())
    throw InputError("score_ae: expected " + std::to_string(params.input_dim()) +
                     " features, got " + std::to_string(x.size()));
  return (x - forward_decoder(forward_encoder(x, params), params)).squaredNorm();
}

double threshold_from_quantile(std::span<const double> scores, double q) {
  if (scores.empty()) throw InputError("threshold_from_quantile: no scores");
  if (!(q >= 0 && q <= 1)) throw ConfigError("threshold_from_quantile: q must be in [0, 1]");
  std::vector<double> s(scores.begin(), scores.end());
  std::sort(s.begin(), s.end());
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, s.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return s[lo] + frac * (s[hi] - s[lo]);
}

Detector Detector::make_ae(ModelParams params) {
  validate_params(params);
  return Detector(DetectorKind::AE, std::move(params), std::nullopt);
}

Detector Detector::make_saecen(const ModelParams& params, const Matrix& normal_train) {
  if (params.encoder.empty()) throw ConfigError("saecen: model has no encoder");
  ModelParams encoder_only;
  encoder_only.encoder = params.encoder;
  auto centroid = fit_centroid(encode(normal_train, encoder_only));
  return Detector(DetectorKind::SAECEN, std::move(encoder_only), std::move(centroid));
}

Detector Detector::from_parts(DetectorKind kind, ModelParams params,
                              std::optional<CentroidModel> centroid) {
  if (kind == DetectorKind::AE) return make_ae(std::move(params));
  if (params.encoder.empty()) throw ConfigError("saecen: model has no encoder");
  if (centroid && centroid->centroid.size() != params.latent_dim())
    throw ConfigError("saecen: centroid length does not match latent dim");
  return Detector(kind, std::move(params), std::move(centroid));
}

double Detector::score(const Vector& x) const {
  return kind_ == DetectorKind::AE ? score_ae(x, params_) : score_saecen(x, *this);
}

std::vector<double> Detector::score_rows(const Matrix& rows) const {
  if (rows.cols() != input_dim())
    throw InputError("score: expected " + std::to_string(input_dim()) + " features, got " +
                     std::to_string(rows.cols()));
  Vector s;
  if (kind_ == DetectorKind::AE) {
    s = (rows - reconstruct(rows, params_)).rowwise().squaredNorm();
  } else {
    if (!centroid_) throw StateError("score_saecen: centroid not fitted");
    const Matrix h = encode(rows, params_);
    s = (h.rowwise() - centroid_->centroid.transpose()).rowwise().norm();
  }
  return {s.data(), s.data() + s.size()};
}

Matrix Detector::latents(const Matrix& rows) const { return encode(rows, params_); }

double score_saecen(const Vector& x, const Detector& detector) {
  if (!detector.centroid()) throw StateError("score_saecen: centroid not fitted");
  if (x.size() != detector.input_dim())
    throw InputError("score_saecen: expected " + std::to_string(detector.input_dim()) +
                     " features, got " + std::to_string(x.size()));
  return (forward_encoder(x, detector.params()) - detector.centroid()->centroid).norm();
}

}  // namespace fedmse
