#pragma once

// Versioned JSON container for models and deployable detectors.
//
//   {"format": "fedmse-model", "version": 1, "kind": "params" | "ae" | "saecen",
//    "input_dim": n, "latent_dim": m,
//    "encoder": [{"in": i, "out": o, "activation": "tanh" | "identity",
//                 "weights": [o*i values, row-major], "biases": [o values]}, ...],
//    "decoder": [...],              // omitted for a stripped saecen detector
//    "centroid": [m values],        // saecen only
//    "normalizer": {"mean": [...], "std": [...]},   // optional
//    "threshold": t,                // optional
//    "gateway_id": g, "config_hash": "..."}         // optional provenance
//
// Doubles are written with shortest round-trip precision.

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "fedmse/data.hpp"
#include "fedmse/detector.hpp"

namespace fedmse {

inline constexpr int kModelFormatVersion = 1;

nlohmann::json params_to_json(const ModelParams& params);
/// Reads encoder/decoder stacks from a model object. `require_decoder` false
/// allows an encoder-only model.
ModelParams params_from_json(const nlohmann::json& j, bool require_decoder = true);

void save_params(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_params(const std::filesystem::path& path);

struct DetectorBundle {
  Detector detector;
  std::optional<NormalizerStats> normalizer;
  std::optional<double> threshold;
  int gateway_id = -1;
  std::string config_hash;
};

nlohmann::json detector_to_json(const DetectorBundle& bundle);
DetectorBundle detector_from_json(const nlohmann::json& j);

void save_detector(const std::filesystem::path& path, const DetectorBundle& bundle);
DetectorBundle load_detector(const std::filesystem::path& path);

/// Writes `text` to `path` via a temporary file and rename.
void write_text_file(const std::filesystem::path& path, const std::string& text);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace fedmse
