#include "fedmse/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "fedmse/model_io.hpp"

namespace fedmse {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t run_seed(std::uint64_t master_seed, int repeat) {
  return derive_seed({master_seed, static_cast<std::uint64_t>(repeat)});
}

// ---------------------------------------------------------------------------
// Data preparation

PreparedData prepare_data(const ExperimentConfig& cfg) {
  cfg.validate();
  PreparedData out;
  const auto master = cfg.master_seed;
  if (cfg.data.source == "synthetic") {
    out.dataset = synth_generate(cfg.data.synthetic, derive_seed(master, Stream::Synthetic));
  } else {
    auto loaded = load_manifest_dataset(cfg.data.manifest, cfg.data.subsample, master);
    out.dataset = std::move(loaded.data);
    out.rejected_rows = loaded.rejected_rows;
    if (out.rejected_rows > 0)
      spdlog::warn("rejected {} rows with non-finite values", out.rejected_rows);
  }

  PartitionOptions popts;
  popts.excluded_device_types = cfg.data.new_device_types;
  Rng partition_rng(derive_seed(master, Stream::Partition));
  out.plan = dirichlet_partition(out.dataset, cfg.n_gateways, cfg.dirichlet_alpha, partition_rng, popts);

  for (int g = 0; g < cfg.n_gateways; ++g) {
    Rng split_rng(derive_seed(master, Stream::Split, static_cast<std::uint64_t>(g)));
    out.splits.push_back(split_local(out.plan.gateway_rows(g), split_rng));
  }

  TestSetOptions topts;
  topts.anomaly_ratio = cfg.data.anomaly_ratio;
  topts.new_device_types = cfg.data.new_device_types;
  topts.new_device_fraction = cfg.data.new_device_fraction;
  Rng test_rng(derive_seed(master, Stream::TestSet));
  out.tests = build_test_sets(out.dataset, out.plan, out.splits, topts, test_rng);

  for (int g = 0; g < cfg.n_gateways; ++g) {
    const auto& split = out.splits[static_cast<std::size_t>(g)];
    GatewayState gw;
    gw.id = g;
    gw.normalizer = zscore_fit(out.dataset.feature_rows(split.train));
    gw.train = gw.normalizer.apply(out.dataset.feature_rows(split.train));
    gw.val = gw.normalizer.apply(out.dataset.feature_rows(split.val));
    gw.dev_pool = gw.normalizer.apply(out.dataset.feature_rows(split.dev_pool));
    const auto& test_rows = out.tests[static_cast<std::size_t>(g)];
    gw.test = gw.normalizer.apply(out.dataset.feature_rows(test_rows));
    for (RowIndex r : test_rows) gw.test_labels.push_back(out.dataset.labels[static_cast<std::size_t>(r)]);
    out.gateways.push_back(std::move(gw));
  }
  return out;
}

Architecture architecture_for(const ExperimentConfig& cfg, int input_dim) {
  return Architecture{input_dim, cfg.hidden_dim, cfg.latent_dim}.resolved();
}

// ---------------------------------------------------------------------------
// Runs

RunOutput run_once(const ExperimentConfig& cfg, const PreparedData& data, DetectorKind model,
                   Aggregation algorithm, int repeat) {
  const std::uint64_t seed = run_seed(cfg.master_seed, repeat);
  const auto arch = architecture_for(cfg, static_cast<int>(data.dataset.dims()));
  const ModelParams init = init_autoencoder(arch, derive_seed(seed, Stream::Init));

  std::vector<GatewayState> gateways = data.gateways;
  for (auto& g : gateways) g.local_params = init;
  Rng dev_rng(derive_seed(seed, Stream::DevSet));
  const Matrix dev = assemble_dev_dataset(gateways, dev_rng);

  const auto fed = cfg.federation(model, algorithm);
  TrainingResult trained;
  try {
    trained = run_training(fed, gateways, dev, init, seed);
  } catch (const std::exception& e) {
    spdlog::error("{} / {} repeat {}: training failed: {}", to_string(model), to_string(algorithm),
                  repeat, e.what());
    throw;
  }

  RunOutput out;
  out.global = trained.global;
  out.detectors = build_detectors(model, trained.global, gateways);
  RunReport& rep = out.report;
  rep.config_hash = config_hash(cfg);
  rep.model = to_string(model);
  rep.algorithm = to_string(algorithm);
  rep.repeat = repeat;
  rep.seed = seed;
  rep.initial_dev_mse = trained.initial_dev_mse;
  rep.best_round = trained.best_round;
  rep.rounds = std::move(trained.history);
  for (std::size_t g = 0; g < gateways.size(); ++g) {
    const auto scores = out.detectors[g].score_rows(gateways[g].test);
    rep.gateways.push_back(evaluate_gateway(gateways[g].id, scores, gateways[g].test_labels));
  }
  rep.auc = summarize_gateways(rep.gateways);
  spdlog::info("{:>6} {:<7} repeat {}: AUC {:.4f} +- {:.4f} ({} rounds, best {})", rep.model,
               rep.algorithm, repeat, rep.auc.mean, rep.auc.std, rep.rounds.size(), rep.best_round);
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const PreparedData& data,
                                const std::function<void(const RunOutput&)>& on_run) {
  ExperimentResult result;
  result.config_hash = config_hash(cfg);
  result.realized_js = data.plan.realized_js;
  result.js_vs_pooled = data.plan.js_vs_pooled;
  for (auto model : cfg.models) {
    for (auto algorithm : cfg.algorithms) {
      std::vector<RunReport> runs;
      for (int r = 0; r < cfg.repeats; ++r) {
        RunOutput out = run_once(cfg, data, model, algorithm, r);
        if (on_run) on_run(out);
        runs.push_back(std::move(out.report));
      }
      result.combos.push_back(summarize_combo(runs));
      result.runs.push_back(std::move(runs));
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

json mean_std_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

json run_to_json(const RunReport& r) {
  json rounds = json::array();
  for (const auto& rec : r.rounds)
    rounds.push_back({{"round", rec.round},
                      {"selected", rec.selected},
                      {"weights", rec.weights},
                      {"dev_mse", rec.dev_mse},
                      {"dev_objective", rec.dev_objective}});
  json gws = json::array();
  for (const auto& g : r.gateways)
    gws.push_back({{"gateway", g.gateway_id},
                   {"auc", g.auc},
                   {"n_test", g.n_test},
                   {"n_anomalous", g.n_anomalous},
                   {"score_min", g.scores.min},
                   {"score_median", g.scores.median},
                   {"score_max", g.scores.max}});
  return {{"config_hash", r.config_hash},
          {"model", r.model},
          {"algorithm", r.algorithm},
          {"repeat", r.repeat},
          {"seed", r.seed},
          {"initial_dev_mse", r.initial_dev_mse},
          {"best_round", r.best_round},
          {"rounds", rounds},
          {"gateways", gws},
          {"auc", mean_std_json(r.auc)}};
}

std::string combo_label(const std::string& model, const std::string& algorithm) {
  const std::string m = model == "ae" ? "AE" : "SAE-CEN";
  const std::string a = algorithm == "fedavg" ? "FedAvg" : algorithm == "fedprox" ? "FedProx" : "MSEAvg";
  return m + " " + a;
}

std::string cell(const json& ms) {
  return fmt::format("{:.2f}±{:.2f}", 100.0 * ms.at("mean").get<double>(), 100.0 * ms.at("std").get<double>());
}

/// Pads by display width; the ± sign is one column but two bytes.
std::string pad(const std::string& s, std::size_t width) {
  std::size_t display = 0;
  for (unsigned char c : s) display += (c & 0xC0) != 0x80;
  return s + std::string(width > display ? width - display : 0, ' ');
}

std::string render_rows(const std::vector<std::string>& header,
                        const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size(), 0);
  auto measure = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      std::size_t d = 0;
      for (unsigned char c : r[i]) d += (c & 0xC0) != 0x80;
      width[i] = std::max(width[i], d);
    }
  };
  measure(header);
  for (const auto& r : rows) measure(r);
  std::string out;
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) out += pad(r[i], width[i]) + (i + 1 < r.size() ? "  " : "");
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += '\n';
  };
  line(header);
  std::size_t total = 0;
  for (auto w : width) total += w + 2;
  out += std::string(total - 2, '-') + '\n';
  for (const auto& r : rows) line(r);
  return out;
}

json load_report_file(const fs::path& p) { return read_json_file(p); }

}  // namespace

json report_to_json(const ExperimentConfig& cfg, const ExperimentResult& result) {
  json effective = to_json(cfg);
  effective.erase("output_dir");
  json combos = json::array();
  for (std::size_t c = 0; c < result.combos.size(); ++c) {
    const auto& s = result.combos[c];
    json per_gw = json::array();
    for (std::size_t g = 0; g < s.per_gateway.size(); ++g)
      per_gw.push_back({{"gateway", g}, {"mean", s.per_gateway[g].mean}, {"std", s.per_gateway[g].std}});
    json runs = json::array();
    for (const auto& r : result.runs[c]) runs.push_back(run_to_json(r));
    combos.push_back({{"model", s.model},
                      {"algorithm", s.algorithm},
                      {"per_gateway", per_gw},
                      {"average", mean_std_json(s.average)},
                      {"across_gateways", mean_std_json(s.across_gateways)},
                      {"repeats", mean_std_json(s.repeats)},
                      {"runs", runs}});
  }
  return {{"format", "fedmse-report"},
          {"version", 1},
          {"config_hash", result.config_hash},
          {"config", effective},
          {"partition", {{"realized_js", result.realized_js}, {"js_vs_pooled", result.js_vs_pooled}}},
          {"combos", combos}};
}

std::string render_table(const json& report) {
  const auto& combos = report.at("combos");
  std::vector<std::string> header = {"Gateway"};
  for (const auto& c : combos) header.push_back(combo_label(c.at("model"), c.at("algorithm")));
  std::vector<std::vector<std::string>> rows;
  const std::size_t n_gw = combos.empty() ? 0 : combos.front().at("per_gateway").size();
  for (std::size_t g = 0; g < n_gw; ++g) {
    std::vector<std::string> row = {fmt::format("Gateway {}", g + 1)};
    for (const auto& c : combos) row.push_back(cell(c.at("per_gateway").at(g)));
    rows.push_back(std::move(row));
  }
  for (const auto& [label, key] : {std::pair{"Average", "average"},
                                   std::pair{"Across gateways", "across_gateways"},
                                   std::pair{"Across repeats", "repeats"}}) {
    std::vector<std::string> row = {label};
    for (const auto& c : combos) row.push_back(cell(c.at(key)));
    rows.push_back(std::move(row));
  }
  const auto& cfg = report.at("config");
  std::string out = fmt::format(
      "AUC (%) per gateway, mean±std over {} repeats\nconfig {}  gateways {}  ratio {}  alpha {}  "
      "realized JS {:.4f} (vs pooled {:.4f})\n\n",
      cfg.at("repeats").get<int>(), report.at("config_hash").get<std::string>(),
      cfg.at("n_gateways").get<int>(), cfg.at("gateway_ratio").get<double>(),
      cfg.at("dirichlet_alpha").get<double>(), report.at("partition").at("realized_js").get<double>(),
      report.at("partition").at("js_vs_pooled").get<double>());
  out += render_rows(header, rows);
  out += "\nAverage: mean of per-gateway means ± mean of per-gateway stds across repeats.\n"
         "Across gateways: mean over repeats of the gateway mean ± the gateway std.\n";
  return out;
}

std::string render_sweep_table(const json& sweep) {
  const std::string param = sweep.at("parameter");
  std::vector<std::string> header = {param == "gateway_ratio" ? "Gateway ratio" : "Network scale"};
  std::vector<std::vector<std::string>> rows;
  bool header_done = false;
  for (const auto& p : sweep.at("points")) {
    const double v = p.at("value");
    std::vector<std::string> row = {param == "gateway_ratio" ? fmt::format("{}%", v * 100)
                                                             : fmt::format("{}-gateway", v)};
    if (p.contains("error")) {
      row.push_back("failed: " + p.at("error").get<std::string>());
    } else {
      for (const auto& c : p.at("combos")) {
        if (!header_done) header.push_back(combo_label(c.at("model"), c.at("algorithm")));
        row.push_back(cell(c.at("average")));
      }
      header_done = true;
    }
    rows.push_back(std::move(row));
  }
  for (auto& r : rows) r.resize(std::max(r.size(), header.size()));
  return fmt::format("AUC (%) by {}, Average row of each point\n\n", param) + render_rows(header, rows);
}

// ---------------------------------------------------------------------------
// Commands

OutputLock::OutputLock(const fs::path& dir) : path_(dir / ".fedmse.lock") {
  fs::create_directories(dir);
  std::FILE* f = std::fopen(path_.c_str(), "wx");
  if (!f) throw IoError("output directory " + dir.string() + " is locked by another run (" + path_.string() + ")");
  std::fclose(f);
}

OutputLock::~OutputLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

namespace {

PartitionOutput write_partition(const ExperimentConfig& cfg, const PreparedData& data, const fs::path& out_dir) {
  PartitionOutput out;
  out.plan = data.plan;
  out.assignment_csv = out_dir / "partition.csv";
  out.metadata_json = out_dir / "partition.json";
  std::string csv = "row_index,gateway_id\n";
  for (std::size_t r = 0; r < data.plan.assignment.size(); ++r)
    csv += fmt::format("{},{}\n", r, data.plan.assignment[r]);
  write_text_file(out.assignment_csv, csv);

  json proportions = json::array(), counts = json::array();
  for (Eigen::Index k = 0; k < data.plan.proportions.rows(); ++k) {
    std::vector<double> p, c;
    for (Eigen::Index g = 0; g < data.plan.proportions.cols(); ++g) {
      p.push_back(data.plan.proportions(k, g));
      c.push_back(data.plan.counts(k, g));
    }
    proportions.push_back(p);
    counts.push_back(c);
  }
  json split_sizes = json::array();
  for (const auto& s : data.splits)
    split_sizes.push_back({s.train.size(), s.val.size(), s.dev_pool.size(), s.test_add.size()});
  json test_sizes = json::array();
  for (const auto& t : data.tests) test_sizes.push_back(t.size());
  const json meta = {{"format", "fedmse-partition"},
                     {"version", 1},
                     {"config_hash", config_hash(cfg)},
                     {"n_gateways", data.plan.n_gateways},
                     {"alpha", data.plan.alpha},
                     {"realized_js", data.plan.realized_js},
                     {"js_vs_pooled", data.plan.js_vs_pooled},
                     {"redraws", data.plan.redraws},
                     {"rows", data.dataset.rows()},
                     {"rejected_rows", data.rejected_rows},
                     {"device_types", data.plan.device_types},
                     {"proportions", proportions},
                     {"counts", counts},
                     {"split_sizes", split_sizes},
                     {"test_sizes", test_sizes}};
  write_text_file(out.metadata_json, meta.dump(1) + "\n");
  return out;
}

std::string combo_file_stem(const std::string& model, const std::string& algorithm) {
  return model + "_" + algorithm;
}

}  // namespace

PartitionOutput cmd_partition(const ExperimentConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  OutputLock lock(out_dir);
  const PreparedData data = prepare_data(cfg);
  spdlog::info("partitioned {} rows over {} gateways, realized JS {:.4f}", data.dataset.rows(),
               cfg.n_gateways, data.plan.realized_js);
  return write_partition(cfg, data, out_dir);
}

ExperimentResult cmd_train(const ExperimentConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  OutputLock lock(out_dir);
  write_text_file(out_dir / "config.json", to_json(cfg).dump(2) + "\n");
  const PreparedData data = prepare_data(cfg);
  write_partition(cfg, data, out_dir);
  const std::string hash = config_hash(cfg);

  json timing = json::array();
  auto persist = [&](const RunOutput& run) {
    const auto& r = run.report;
    const std::string stem = combo_file_stem(r.model, r.algorithm);
    write_text_file(out_dir / "runs" / fmt::format("{}_r{}.json", stem, r.repeat), run_to_json(r).dump(1) + "\n");
    save_params(out_dir / "models" / fmt::format("{}_r{}.json", stem, r.repeat), run.global);
    std::vector<double> times;
    for (const auto& rec : r.rounds) times.push_back(rec.wall_time_s);
    timing.push_back({{"model", r.model}, {"algorithm", r.algorithm}, {"repeat", r.repeat}, {"round_seconds", times}});
    if (r.repeat != 0) return;
    for (std::size_t g = 0; g < run.detectors.size(); ++g) {
      const auto& gw = data.gateways[g];
      const auto train_scores = run.detectors[g].score_rows(gw.train);
      DetectorBundle b{run.detectors[g], gw.normalizer,
                       threshold_from_quantile(train_scores, cfg.threshold_quantile),
                       static_cast<int>(g), hash};
      save_detector(out_dir / "detectors" / stem / fmt::format("gateway_{}.json", g), b);
    }
  };
  ExperimentResult result = run_experiment(cfg, data, persist);

  const json report = report_to_json(cfg, result);
  write_text_file(out_dir / "report.json", report.dump(1) + "\n");
  write_text_file(out_dir / "report.txt", render_table(report));
  write_text_file(out_dir / "timing.json", timing.dump(1) + "\n");
  return result;
}

std::vector<SweepPoint> cmd_sweep(const ExperimentConfig& cfg, const std::string& parameter,
                                  const std::vector<double>& values, const fs::path& out_dir) {
  ExperimentConfig check = cfg;
  check.sweep = SweepConfig{parameter, values};
  check.validate();

  std::vector<SweepPoint> points;
  json jpoints = json::array();
  for (double v : values) {
    SweepPoint p;
    p.value = v;
    ExperimentConfig point = cfg;
    point.sweep.reset();
    if (parameter == "gateway_ratio") point.gateway_ratio = v;
    else point.n_gateways = static_cast<int>(v);
    const fs::path dir = out_dir / fmt::format("{}_{}", parameter, v);
    point.output_dir = dir.string();
    json jp = {{"value", v}};
    try {
      p.result = cmd_train(point, dir);
      jp["config_hash"] = p.result->config_hash;
      jp["realized_js"] = p.result->realized_js;
      json combos = json::array();
      for (const auto& c : p.result->combos)
        combos.push_back({{"model", c.model},
                          {"algorithm", c.algorithm},
                          {"average", mean_std_json(c.average)},
                          {"across_gateways", mean_std_json(c.across_gateways)},
                          {"repeats", mean_std_json(c.repeats)}});
      jp["combos"] = combos;
    } catch (const std::exception& e) {
      spdlog::error("sweep point {}={} failed: {}", parameter, v, e.what());
      p.error = e.what();
      jp["error"] = p.error;
    }
    jpoints.push_back(jp);
    points.push_back(std::move(p));
  }
  OutputLock lock(out_dir);
  const json sweep = {{"format", "fedmse-sweep"}, {"version", 1}, {"parameter", parameter}, {"points", jpoints}};
  write_text_file(out_dir / "sweep.json", sweep.dump(1) + "\n");
  write_text_file(out_dir / "sweep.txt", render_sweep_table(sweep));
  return points;
}

std::size_t cmd_score(const fs::path& model_path, const fs::path& input_csv, const fs::path& output_csv,
                      std::optional<double> threshold) {
  const DetectorBundle bundle = load_detector(model_path);
  std::vector<std::string> names;
  Matrix x = read_feature_matrix(input_csv, &names);
  if (static_cast<Eigen::Index>(names.size()) != bundle.detector.input_dim())
    throw InputError("score: model expects " + std::to_string(bundle.detector.input_dim()) +
                     " features, input has " + std::to_string(names.size()));
  if (bundle.normalizer && x.rows() > 0) x = bundle.normalizer->apply(x);
  const auto t = threshold ? threshold : bundle.threshold;

  std::string out = t ? "row,score,verdict\n" : "row,score\n";
  const auto scores = x.rows() > 0 ? bundle.detector.score_rows(x) : std::vector<double>{};
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out += fmt::format("{},{}", i, scores[i]);
    if (t) out += scores[i] > *t ? ",anomalous" : ",normal";
    out += '\n';
  }
  write_text_file(output_csv, out);
  return scores.size();
}

std::string cmd_report(const fs::path& out_dir) {
  if (fs::exists(out_dir / "report.json")) return render_table(load_report_file(out_dir / "report.json"));
  if (fs::exists(out_dir / "sweep.json")) return render_sweep_table(load_report_file(out_dir / "sweep.json"));
  throw IoError("no report.json or sweep.json in " + out_dir.string());
}

}  // namespace fedmse
