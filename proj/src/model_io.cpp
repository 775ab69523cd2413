#include "fedmse/model_io.hpp"

#include <fstream>
#include <sstream>

namespace fedmse {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw ConfigError(std::string("model file: '") + what + "' must be an array");
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json layers_to_json(const std::vector<DenseLayer<double>>& layers) {
  json arr = json::array();
  for (const auto& l : layers) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weights.size()));
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
    arr.push_back({{"in", l.in_dim()},
                   {"out", l.out_dim()},
                   {"activation", to_string(l.activation)},
                   {"weights", w},
                   {"biases", vector_to_json(l.biases)}});
  }
  return arr;
}

std::vector<DenseLayer<double>> layers_from_json(const json& arr, const char* what) {
  if (!arr.is_array()) throw ConfigError(std::string("model file: '") + what + "' must be an array");
  std::vector<DenseLayer<double>> out;
  for (const auto& j : arr) {
    DenseLayer<double> l;
    const auto in = j.at("in").get<Eigen::Index>();
    const auto o = j.at("out").get<Eigen::Index>();
    const auto act = j.at("activation").get<std::string>();
    if (act == "tanh") l.activation = Activation::Tanh;
    else if (act == "identity") l.activation = Activation::Identity;
    else throw ConfigError("model file: unknown activation '" + act + "'");
    const auto w = j.at("weights").get<std::vector<double>>();
    if (in < 1 || o < 1 || static_cast<Eigen::Index>(w.size()) != in * o)
      throw ConfigError(std::string("model file: ") + what + " layer weight count does not match in*out");
    l.weights = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        w.data(), o, in);
    l.biases = vector_from_json(j.at("biases"), "biases");
    if (l.biases.size() != o) throw ConfigError("model file: bias count does not match out");
    out.push_back(std::move(l));
  }
  return out;
}

void check_header(const json& j) {
  if (j.value("format", "") != "fedmse-model") throw ConfigError("model file: not a fedmse-model container");
  const int version = j.value("version", 0);
  if (version != kModelFormatVersion)
    throw ConfigError("model file: unsupported version " + std::to_string(version));
}

}  // namespace

json params_to_json(const ModelParams& params) {
  json j = {{"format", "fedmse-model"},
            {"version", kModelFormatVersion},
            {"kind", "params"},
            {"input_dim", params.input_dim()},
            {"latent_dim", params.latent_dim()},
            {"encoder", layers_to_json(params.encoder)}};
  if (!params.decoder.empty()) j["decoder"] = layers_to_json(params.decoder);
  return j;
}

ModelParams params_from_json(const json& j, bool require_decoder) {
  try {
    check_header(j);
    ModelParams p;
    p.encoder = layers_from_json(j.at("encoder"), "encoder");
    if (j.contains("decoder")) p.decoder = layers_from_json(j.at("decoder"), "decoder");
    if (p.encoder.empty()) throw ConfigError("model file: empty encoder");
    for (std::size_t i = 1; i < p.encoder.size(); ++i)
      if (p.encoder[i].in_dim() != p.encoder[i - 1].out_dim())
        throw ConfigError("model file: encoder layer dims do not chain");
    if (require_decoder || !p.decoder.empty()) validate_params(p);
    return p;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model file: ") + e.what());
  }
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void save_params(const fs::path& path, const ModelParams& params) {
  write_text_file(path, params_to_json(params).dump(1) + "\n");
}

ModelParams load_params(const fs::path& path) { return params_from_json(read_json_file(path)); }

json detector_to_json(const DetectorBundle& b) {
  json j = params_to_json(b.detector.params());
  j["kind"] = to_string(b.detector.kind());
  if (b.detector.centroid()) j["centroid"] = vector_to_json(b.detector.centroid()->centroid);
  if (b.normalizer)
    j["normalizer"] = {{"mean", vector_to_json(b.normalizer->mean)},
                       {"std", vector_to_json(b.normalizer->std)}};
  if (b.threshold) j["threshold"] = *b.threshold;
  if (b.gateway_id >= 0) j["gateway_id"] = b.gateway_id;
  if (!b.config_hash.empty()) j["config_hash"] = b.config_hash;
  return j;
}

DetectorBundle detector_from_json(const json& j) {
  try {
    check_header(j);
    const auto kind_text = j.at("kind").get<std::string>();
    if (kind_text == "params") throw ConfigError("model file: plain parameters, not a detector");
    const DetectorKind kind = detector_kind_from_string(kind_text);
    ModelParams params = params_from_json(j, kind == DetectorKind::AE);
    std::optional<CentroidModel> centroid;
    if (j.contains("centroid")) centroid = CentroidModel{vector_from_json(j["centroid"], "centroid")};
    if (kind == DetectorKind::SAECEN && !centroid)
      throw ConfigError("model file: saecen detector without centroid");
    DetectorBundle b{Detector::from_parts(kind, std::move(params), std::move(centroid)), {}, {}, -1, {}};
    if (j.contains("normalizer")) {
      NormalizerStats s{vector_from_json(j["normalizer"].at("mean"), "mean"),
                        vector_from_json(j["normalizer"].at("std"), "std")};
      if (s.mean.size() != b.detector.input_dim() || s.std.size() != b.detector.input_dim())
        throw ConfigError("model file: normalizer length does not match input dim");
      b.normalizer = std::move(s);
    }
    if (j.contains("threshold")) b.threshold = j["threshold"].get<double>();
    b.gateway_id = j.value("gateway_id", -1);
    b.config_hash = j.value("config_hash", std::string{});
    return b;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model file: ") + e.what());
  }
}

void save_detector(const fs::path& path, const DetectorBundle& bundle) {
  write_text_file(path, detector_to_json(bundle).dump(1) + "\n");
}

DetectorBundle load_detector(const fs::path& path) { return detector_from_json(read_json_file(path)); }

}  // namespace fedmse
