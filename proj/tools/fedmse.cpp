// fedmse: partition / train / sweep / score / report.
//
// Exit status: 0 success, 1 invalid configuration or arguments, 2 runtime
// failure. FEDMSE_LOG sets the log level (trace, debug, info, warn, error, off).

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/cfg/helpers.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "fedmse/config.hpp"
#include "fedmse/errors.hpp"
#include "fedmse/experiment.hpp"

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "JSON config file (defaults when omitted)");
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--override", o.overrides, "dotted key=value, repeatable")->take_all();
}

fedmse::ExperimentConfig resolve(const CommonOptions& o) {
  auto overrides = o.overrides;
  if (o.seed) overrides.push_back(fmt::format("master_seed={}", *o.seed));
  if (!o.out.empty()) overrides.push_back("output_dir=" + nlohmann::json(o.out).dump());
  return fedmse::load_config(o.config, overrides);
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("fedmse");
  logger->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* level = std::getenv("FEDMSE_LOG")) spdlog::cfg::helpers::load_levels(level);
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"Federated autoencoder anomaly detection for IoT gateways"};
  app.require_subcommand(1);

  CommonOptions partition_opts, train_opts, sweep_opts;
  auto* partition = app.add_subcommand("partition", "split the data across gateways");
  add_common(partition, partition_opts);

  auto* train = app.add_subcommand("train", "run every model x algorithm for all repeats");
  add_common(train, train_opts);

  auto* sweep = app.add_subcommand("sweep", "one training run per gateway ratio or network scale");
  add_common(sweep, sweep_opts);
  std::string sweep_param;
  std::vector<double> sweep_values;
  sweep->add_option("--parameter", sweep_param, "gateway_ratio or n_gateways (else from config)")
      ->check(CLI::IsMember({"gateway_ratio", "n_gateways"}));
  sweep->add_option("--values", sweep_values, "sweep points (else from config)")->take_all();

  auto* score = app.add_subcommand("score", "score a feature CSV with a saved detector");
  std::string model_path, input_path, output_path;
  std::optional<double> threshold;
  score->add_option("--model", model_path, "detector file")->required();
  score->add_option("--input", input_path, "feature CSV with header")->required();
  score->add_option("--output", output_path, "scores CSV")->required();
  score->add_option("--threshold", threshold, "verdict threshold (overrides the stored one)");

  auto* report = app.add_subcommand("report", "print the table of a finished train or sweep");
  std::string report_dir;
  report->add_option("--out", report_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*partition) {
      const auto cfg = resolve(partition_opts);
      const auto out = fedmse::cmd_partition(cfg, cfg.output_dir);
      std::cout << fmt::format("realized JS {:.4f} (vs pooled {:.4f}), {} redraws\n{}\n{}\n",
                               out.plan.realized_js, out.plan.js_vs_pooled, out.plan.redraws,
                               out.assignment_csv.string(), out.metadata_json.string());
    } else if (*train) {
      const auto cfg = resolve(train_opts);
      fedmse::cmd_train(cfg, cfg.output_dir);
      std::cout << fedmse::cmd_report(cfg.output_dir);
    } else if (*sweep) {
      auto cfg = resolve(sweep_opts);
      std::string param = sweep_param;
      std::vector<double> values = sweep_values;
      if (param.empty() && cfg.sweep) param = cfg.sweep->parameter;
      if (sweep_values.empty() && cfg.sweep) values = cfg.sweep->values;
      const auto points = fedmse::cmd_sweep(cfg, param, values, cfg.output_dir);
      std::cout << fedmse::cmd_report(cfg.output_dir);
      for (const auto& p : points)
        if (!p.error.empty()) return 2;
    } else if (*score) {
      const auto n = fedmse::cmd_score(model_path, input_path, output_path, threshold);
      spdlog::info("scored {} rows into {}", n, output_path);
    } else if (*report) {
      std::cout << fedmse::cmd_report(report_dir);
    }
  } catch (const std::invalid_argument& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}
