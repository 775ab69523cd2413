#include <doctest.h>

#include <cctype>
#include <cstdlib>
#include <sys/wait.h>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "fedmse/experiment.hpp"
#include "helpers.hpp"

using namespace fedmse;
using namespace fedmse::testing;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = fmt::format("FEDMSE_LOG=off '{}' {} > /dev/null 2>&1", FEDMSE_CLI_PATH, args);
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// Small synthetic config that trains in well under a second per run.
json small_config() {
  const auto s = small_synthetic();
  return {{"data",
           {{"synthetic",
             {{"device_types", s.device_types},
              {"dims", s.dims},
              {"normals_per_type", s.normals_per_type},
              {"anomalies_per_type", s.anomalies_per_type}}}}},
          {"n_gateways", 6},
          {"models", {"ae", "saecen"}},
          {"algorithms", {"fedavg", "mseavg"}},
          {"train", {{"learning_rate", 1e-3}, {"local_epochs", 3}}},
          {"global_rounds", 2},
          {"repeats", 1}};
}

fs::path write_config(const fs::path& dir, const json& j) {
  spit(dir / "config.in.json", j.dump());
  return dir / "config.in.json";
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string line; std::getline(ss, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("partition command") {
  const auto dir = scratch_dir("cli_partition");
  auto cfg = small_config();
  cfg["dirichlet_alpha"] = 1000.0;
  const auto path = write_config(dir, cfg);

  REQUIRE(run_cli(fmt::format("partition --config '{}' --out '{}'", path.string(), (dir / "a").string())) == 0);
  REQUIRE(run_cli(fmt::format("partition --config '{}' --out '{}'", path.string(), (dir / "b").string())) == 0);
  const auto meta = json::parse(slurp(dir / "a" / "partition.json"));
  CHECK(meta.at("realized_js").get<double>() <= 0.05);
  const auto csv = slurp(dir / "a" / "partition.csv");
  CHECK(csv.rfind("row_index,gateway_id\n", 0) == 0);
  CHECK(csv == slurp(dir / "b" / "partition.csv"));
  CHECK(slurp(dir / "a" / "partition.json") == slurp(dir / "b" / "partition.json"));

  REQUIRE(run_cli(fmt::format("partition --config '{}' --seed 7 --out '{}'", path.string(), (dir / "c").string())) == 0);
  CHECK(csv != slurp(dir / "c" / "partition.csv"));
}

TEST_CASE("invalid configuration exits 1 before writing") {
  const auto dir = scratch_dir("cli_invalid");
  const auto path = write_config(dir, small_config());
  for (const char* o : {"dirichlet_alpha=0", "dirichlet_alpha=-2", "gateway_ratio=0", "no_such_key=1"}) {
    const auto out = dir / "out";
    CHECK(run_cli(fmt::format("train --config '{}' --override {} --out '{}'", path.string(), o, out.string())) == 1);
    CHECK_FALSE(fs::exists(out));
  }
  CHECK(run_cli("frobnicate") == 1);
  CHECK(run_cli("train --no-such-flag") == 1);
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli(fmt::format("report --out '{}'", (dir / "nothing").string())) == 2);
}

TEST_CASE("train, score and report") {
  const auto dir = scratch_dir("cli_train");
  const auto cfg_json = small_config();
  const auto path = write_config(dir, cfg_json);
  const auto a = dir / "a", b = dir / "b";
  REQUIRE(run_cli(fmt::format("train --config '{}' --out '{}'", path.string(), a.string())) == 0);
  REQUIRE(run_cli(fmt::format("train --config '{}' --out '{}'", path.string(), b.string())) == 0);

  for (const char* f : {"config.json", "partition.csv", "partition.json", "report.json", "report.txt",
                        "timing.json", "runs/saecen_mseavg_r0.json", "models/ae_fedavg_r0.json",
                        "detectors/saecen_mseavg/gateway_0.json"})
    CHECK_MESSAGE(fs::exists(a / f), f);
  CHECK(slurp(a / "report.json") == slurp(b / "report.json"));
  CHECK(slurp(a / "report.txt") == slurp(b / "report.txt"));
  CHECK(slurp(a / "models/saecen_mseavg_r0.json") == slurp(b / "models/saecen_mseavg_r0.json"));

  const auto report = json::parse(slurp(a / "report.json"));
  CHECK(report.at("combos").size() == 4);
  const auto table = lines_of(slurp(a / "report.txt"));
  int gateway_rows = 0;
  for (const auto& l : table) gateway_rows += l.size() > 8 && l.rfind("Gateway ", 0) == 0 && std::isdigit(l[8]);
  CHECK(gateway_rows == 6);

  CHECK(run_cli(fmt::format("train --config '{}' --out '{}'", path.string(), a.string())) == 0);
  spit(a / ".fedmse.lock", "");
  CHECK(run_cli(fmt::format("train --config '{}' --out '{}'", path.string(), a.string())) == 2);
  fs::remove(a / ".fedmse.lock");

  CHECK(run_cli(fmt::format("report --out '{}'", a.string())) == 0);

  // Score gateway 0's raw training normals with its saved detector.
  const auto cfg = load_config(path);
  const auto data = prepare_data(cfg);
  const auto& rows = data.splits[0].train;
  std::string csv;
  for (int j = 0; j < cfg.data.synthetic.dims; ++j) csv += fmt::format("{}f{}", j ? "," : "", j);
  csv += '\n';
  for (auto r : rows) {
    for (int j = 0; j < cfg.data.synthetic.dims; ++j)
      csv += fmt::format("{}{}", j ? "," : "", data.dataset.features(static_cast<Eigen::Index>(r), j));
    csv += '\n';
  }
  spit(dir / "train0.csv", csv);
  const auto model = a / "detectors/saecen_mseavg/gateway_0.json";
  const auto threshold = json::parse(slurp(model)).at("threshold").get<double>();
  REQUIRE(run_cli(fmt::format("score --model '{}' --input '{}' --output '{}'", model.string(),
                              (dir / "train0.csv").string(), (dir / "s1.csv").string())) == 0);
  REQUIRE(run_cli(fmt::format("score --model '{}' --input '{}' --output '{}'", model.string(),
                              (dir / "train0.csv").string(), (dir / "s2.csv").string())) == 0);
  CHECK(slurp(dir / "s1.csv") == slurp(dir / "s2.csv"));
  const auto out = lines_of(slurp(dir / "s1.csv"));
  REQUIRE(out.size() == rows.size() + 1);
  CHECK(out[0] == "row,score,verdict");
  std::vector<double> scores;
  std::size_t flagged = 0;
  for (std::size_t i = 1; i < out.size(); ++i) {
    const auto c1 = out[i].find(','), c2 = out[i].rfind(',');
    scores.push_back(std::stod(out[i].substr(c1 + 1, c2 - c1 - 1)));
    flagged += out[i].substr(c2 + 1) == "anomalous";
  }
  std::sort(scores.begin(), scores.end());
  CHECK(scores[scores.size() / 2] < threshold);
  // The threshold is the 0.95 quantile of exactly these scores.
  CHECK(flagged <= rows.size() / 20 + 1);

  spit(dir / "empty.csv", "f0,f1,f2,f3,f4,f5,f6,f7\n");
  REQUIRE(run_cli(fmt::format("score --model '{}' --input '{}' --output '{}' --threshold 1", model.string(),
                              (dir / "empty.csv").string(), (dir / "s3.csv").string())) == 0);
  CHECK(slurp(dir / "s3.csv") == "row,score,verdict\n");

  spit(dir / "narrow.csv", "f0,f1\n1,2\n");
  CHECK(run_cli(fmt::format("score --model '{}' --input '{}' --output '{}'", model.string(),
                            (dir / "narrow.csv").string(), (dir / "s4.csv").string())) == 2);
}

TEST_CASE("sweep command") {
  const auto dir = scratch_dir("cli_sweep");
  auto cfg = small_config();
  cfg["models"] = {"saecen"};
  cfg["algorithms"] = {"mseavg"};
  const auto path = write_config(dir, cfg);

  REQUIRE(run_cli(fmt::format("sweep --config '{}' --parameter gateway_ratio --values 0.5 1.0 --out '{}'",
                              path.string(), (dir / "ratio").string())) == 0);
  const auto sweep = json::parse(slurp(dir / "ratio" / "sweep.json"));
  CHECK(sweep.at("points").size() == 2);
  const auto table = cmd_report(dir / "ratio");
  CHECK(table.find("50%") != std::string::npos);
  CHECK(table.find("100%") != std::string::npos);

  REQUIRE(run_cli(fmt::format("sweep --config '{}' --parameter n_gateways --values 4 8 --out '{}'",
                              path.string(), (dir / "scale").string())) == 0);
  const auto scale = cmd_report(dir / "scale");
  CHECK(scale.find("4-gateway") != std::string::npos);
  CHECK(scale.find("8-gateway") != std::string::npos);

  CHECK(run_cli(fmt::format("sweep --config '{}' --parameter n_gateways --values 1.5 --out '{}'",
                            path.string(), (dir / "bad").string())) == 1);
}
