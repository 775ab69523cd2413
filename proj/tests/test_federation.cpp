#include <doctest.h>

#include <set>

#include "fedmse/errors.hpp"
#include "fedmse/federation.hpp"
#include "helpers.hpp"

using namespace fedmse;
using namespace fedmse::testing;

namespace {

std::vector<GatewayState> make_gateways(int n, int dims, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GatewayState> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& s = g[static_cast<std::size_t>(i)];
    s.id = i;
    const double shift = 0.3 * i;
    s.train = random_matrix(rng, 30 + 5 * i, dims, 0.5).array() + shift;
    s.val = random_matrix(rng, 10, dims, 0.5).array() + shift;
    s.dev_pool = random_matrix(rng, 8 + i, dims, 0.5).array() + shift;
  }
  return g;
}

}  // namespace

TEST_CASE("select_gateways") {
  Rng rng(1);
  const auto all = select_gateways(10, 1.0, rng);
  CHECK(all == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});

  for (int t = 0; t < 20; ++t) {
    const auto s = select_gateways(10, 0.5, rng);
    CHECK(s.size() == 5);
    CHECK(std::set<int>(s.begin(), s.end()).size() == 5);
    CHECK(std::is_sorted(s.begin(), s.end()));
    for (int id : s) CHECK((id >= 0 && id < 10));
  }
  CHECK(select_gateways(3, 0.01, rng).size() == 1);

  Rng a(7), b(7);
  CHECK(select_gateways(20, 0.3, a) == select_gateways(20, 0.3, b));
  CHECK_THROWS_AS(select_gateways(10, 0.0, rng), ConfigError);
  CHECK_THROWS_AS(select_gateways(10, 1.5, rng), ConfigError);
}

TEST_CASE("assemble_dev_dataset") {
  Rng rng(2);
  std::vector<GatewayState> g(3);
  for (int i = 0; i < 3; ++i) {
    g[i].dev_pool = Matrix::Constant(3 + 2 * i, 2, double(i));
  }
  const Matrix dev = assemble_dev_dataset(g, rng);
  CHECK(dev.rows() == 9);
  for (int i = 0; i < 3; ++i) CHECK((dev.middleRows(3 * i, 3).array() == double(i)).all());

  for (auto& s : g) s.dev_pool = Matrix::Zero(5, 2);
  CHECK(assemble_dev_dataset(g, rng).rows() == 15);

  const auto gw = make_gateways(4, 3, 5);
  Rng a(9), b(9);
  CHECK(assemble_dev_dataset(gw, a) == assemble_dev_dataset(gw, b));

  g[1].dev_pool.resize(0, 2);
  CHECK_THROWS_AS(assemble_dev_dataset(g, rng), InputError);
}

TEST_CASE("fedavg_aggregate") {
  const auto a = random_params(Architecture{5, 0, 0}, 1);
  const auto b = random_params(Architecture{5, 0, 0}, 2);

  const std::vector<ModelParams> same = {a, a, a};
  const std::vector<std::size_t> sizes3 = {2, 5, 7};
  CHECK(fedavg_aggregate(same, sizes3) == a);

  const std::vector<ModelParams> ab = {a, b};
  const std::vector<std::size_t> s13 = {1, 3};
  const Vector got = flatten(fedavg_aggregate(ab, s13));
  const Vector expect = 0.25 * flatten(a) + 0.75 * flatten(b);
  CHECK((got - expect).cwiseAbs().maxCoeff() < 1e-12);

  const auto c = random_params(Architecture{5, 0, 0}, 3);
  const std::vector<ModelParams> abc = {a, b, c};
  CHECK(max_abs_diff(fedavg_aggregate(abc, sizes3), naive_weighted_mean(abc, {2, 5, 7})) < 1e-12);

  const std::vector<std::size_t> zero = {0, 0};
  CHECK_THROWS_AS(fedavg_aggregate(ab, zero), InputError);
  const auto other = random_params(Architecture{6, 0, 0}, 4);
  const std::vector<ModelParams> mixed = {a, other};
  CHECK_THROWS_AS(fedavg_aggregate(mixed, s13), InputError);
}

TEST_CASE("mse_on_dev") {
  ModelParams id;
  id.encoder.push_back({Matrix::Identity(2, 2), Vector::Zero(2), Activation::Identity});
  id.decoder.push_back({Matrix::Identity(2, 2), Vector::Zero(2), Activation::Identity});
  Matrix dev(2, 2);
  dev << 1, 1, -1, 1;
  CHECK(mse_on_dev(id, dev) == kMseFloor);

  auto zero = id;
  zero.decoder[0].weights.setZero();
  CHECK(mse_on_dev(zero, dev) == 2.0);

  const auto p = random_params(Architecture{4, 0, 0}, 5);
  Rng rng(3);
  const Matrix d = random_matrix(rng, 12, 4);
  CHECK(mse_on_dev(p, d) == doctest::Approx(naive_mse(p, d)).epsilon(1e-12));
}

TEST_CASE("mseavg_aggregate") {
  const auto a = random_params(Architecture{4, 0, 0}, 11);

  SUBCASE("fixed point with equal weights") {
    Rng rng(4);
    const Matrix dev = random_matrix(rng, 10, 4);
    const std::vector<ModelParams> same = {a, a, a};
    const auto r = mseavg_aggregate(same, dev);
    CHECK(r.global == a);
    CHECK(r.weights.alpha[0] == r.weights.alpha[1]);
    CHECK(r.weights.alpha[1] == r.weights.alpha[2]);
  }

  SUBCASE("MSE 1 and 3 give 3/4 and 1/4") {
    // Linear one-layer models with x_hat = c x: MSE = (1 - c)^2 mean ||x||^2.
    Matrix dev(2, 2);
    dev << 1, 0, 0, 1;  // mean ||x||^2 = 1
    auto scaled = [](double c) {
      ModelParams p;
      p.encoder.push_back({Matrix::Identity(2, 2), Vector::Zero(2), Activation::Identity});
      p.decoder.push_back({c * Matrix::Identity(2, 2), Vector::Zero(2), Activation::Identity});
      return p;
    };
    const auto ma = scaled(0.0);                    // MSE 1
    const auto mb = scaled(1.0 - std::sqrt(3.0));  // MSE 3
    const std::vector<ModelParams> ms = {ma, mb};
    const auto r = mseavg_aggregate(ms, dev);
    CHECK(r.weights.mse[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(r.weights.mse[1] == doctest::Approx(3.0).epsilon(1e-14));
    const Vector expect = 0.75 * flatten(ma) + 0.25 * flatten(mb);
    CHECK((flatten(r.global) - expect).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("equal MSEs give the arithmetic mean") {
    Matrix dev(2, 2);
    dev << 1, 0, 0, 1;
    ModelParams p;
    p.encoder.push_back({Matrix::Identity(2, 2), Vector::Zero(2), Activation::Identity});
    p.decoder.push_back({Matrix::Zero(2, 2), Vector::Zero(2), Activation::Identity});
    auto q = p;
    q.encoder[0].weights *= 2.0;  // decoder is zero, so MSE stays 1
    const std::vector<ModelParams> ms = {p, q};
    const auto r = mseavg_aggregate(ms, dev);
    const Vector expect = 0.5 * (flatten(p) + flatten(q));
    CHECK((flatten(r.global) - expect).cwiseAbs().maxCoeff() < 1e-15);
  }

  SUBCASE("random instances match the scalar oracle") {
    Rng rng(6);
    for (int t = 0; t < 10; ++t) {
      std::vector<ModelParams> ms;
      for (int k = 0; k < 2 + t % 4; ++k) ms.push_back(random_params(Architecture{4, 0, 0}, 100 * t + k));
      const Matrix dev = random_matrix(rng, 9, 4);
      std::vector<double> alpha;
      for (const auto& m : ms) alpha.push_back(1.0 / std::max(naive_mse(m, dev), kMseFloor));
      const auto r = mseavg_aggregate(ms, dev);
      CHECK(max_abs_diff(r.global, naive_weighted_mean(ms, alpha)) < 1e-12);
    }
  }
}

TEST_CASE("FederationConfig") {
  FederationConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.algorithm = Aggregation::FedAvg;
  cfg.train.prox_mu = 0.001;
  CHECK(cfg.local_train_config().prox_mu == 0.0);
  cfg.algorithm = Aggregation::FedProx;
  CHECK(cfg.local_train_config().prox_mu == 0.001);
  cfg.model = DetectorKind::AE;
  CHECK(cfg.local_train_config().shrink_lambda == 0.0);
  cfg.gateway_ratio = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  CHECK(aggregation_from_string("mseavg") == Aggregation::MSEAvg);
  CHECK(std::string(to_string(Aggregation::FedProx)) == "fedprox");
  CHECK_THROWS_AS(aggregation_from_string("median"), ConfigError);
}

TEST_CASE("run_training") {
  auto gws = make_gateways(10, 4, 3);
  Rng dev_rng(1);
  const Matrix dev = assemble_dev_dataset(gws, dev_rng);
  const auto init = init_autoencoder(Architecture{4, 0, 0}, 2);
  FederationConfig cfg;
  cfg.train.learning_rate = 1e-3;
  cfg.train.local_epochs = 3;
  cfg.global_rounds = 6;

  SUBCASE("E = 0 returns init") {
    cfg.global_rounds = 0;
    const auto r = run_training(cfg, gws, dev, init, 7);
    CHECK(r.global == init);
    CHECK(r.history.empty());
    CHECK(r.best_round == 0);
  }

  SUBCASE("rounds, selection and determinism") {
    auto copy = gws;
    const auto r1 = run_training(cfg, gws, dev, init, 7);
    const auto r2 = run_training(cfg, copy, dev, init, 7);
    CHECK(r1.global == r2.global);
    REQUIRE(r1.history.size() == r2.history.size());
    CHECK(r1.history.size() <= 6);
    for (std::size_t i = 0; i < r1.history.size(); ++i) {
      CHECK(r1.history[i].selected.size() == 5);
      CHECK(r1.history[i].selected == r2.history[i].selected);
      CHECK(r1.history[i].dev_mse == r2.history[i].dev_mse);
      double sum = 0;
      for (double w : r1.history[i].weights) sum += w;
      CHECK(sum == doctest::Approx(1.0));
    }
    CHECK(r1.initial_dev_mse > 0);
    for (const auto& g : gws) CHECK(g.local_params == r1.global);
  }

  SUBCASE("every aggregation improves the dev objective") {
    for (auto alg : {Aggregation::FedAvg, Aggregation::FedProx, Aggregation::MSEAvg}) {
      cfg.algorithm = alg;
      auto copy = gws;
      const auto r = run_training(cfg, copy, dev, init, 3);
      const double best = r.best_round == 0 ? r.initial_dev_objective
                                            : r.history[static_cast<std::size_t>(r.best_round - 1)].dev_objective;
      CHECK(best < r.initial_dev_objective);
    }
  }

  SUBCASE("FedProx with a huge mu stays closer to the anchor than FedAvg") {
    cfg.global_rounds = 1;
    cfg.gateway_ratio = 1.0;
    cfg.algorithm = Aggregation::FedAvg;
    auto a = gws;
    const auto ra = run_training(cfg, a, dev, init, 5);
    cfg.algorithm = Aggregation::FedProx;
    cfg.train.prox_mu = 1e6;
    auto b = gws;
    const auto rb = run_training(cfg, b, dev, init, 5);
    CHECK(squared_distance(rb.history.empty() ? init : b.front().local_params, init) <=
          squared_distance(ra.history.empty() ? init : a.front().local_params, init));
  }

  SUBCASE("threads do not change the result") {
    auto a = gws, b = gws;
    const auto r1 = run_training(cfg, a, dev, init, 9);
    cfg.threads = 3;
    const auto r2 = run_training(cfg, b, dev, init, 9);
    CHECK(r1.global == r2.global);
  }
}

TEST_CASE("build_detectors") {
  const auto gws = make_gateways(3, 4, 8);
  const auto p = random_params(Architecture{4, 0, 0}, 1);
  const auto sae = build_detectors(DetectorKind::SAECEN, p, gws);
  REQUIRE(sae.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(sae[i].kind() == DetectorKind::SAECEN);
    CHECK(sae[i].centroid()->centroid.isApprox(fit_centroid(encode(gws[i].train, p)).centroid));
  }
  const auto ae = build_detectors(DetectorKind::AE, p, gws);
  CHECK(ae[0].params() == p);
}
