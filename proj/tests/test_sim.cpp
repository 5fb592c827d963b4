#include "owcsim/sim.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

#include "owcsim/io.hpp"
#include "support/enumerator.hpp"

namespace owc {
namespace {

config::RunConfig small_config() {
  // Two APs on a 5 x 2.5 m floor: the 45 degree field of view covers the
  // whole room, so every user always sees at least one AP.
  config::RunConfig c;
  c.num_users = 3;
  c.ap_grid_x = 2;
  c.ap_grid_y = 1;
  c.room_y_m = 2.5;
  c.periods = 6;
  c.window_tau = 2;
  c.dataset_scenarios = 2;
  c.sweep_seeds = 2;
  c.seed = 11;
  return c;
}

TEST(GenerateScenario, DeterministicPerSeed) {
  const auto cfg = small_config();
  const auto a = sim::generate_scenario(cfg, 42);
  const auto b = sim::generate_scenario(cfg, 42);
  ASSERT_EQ(a.periods(), b.periods());
  for (int t = 0; t < a.periods(); ++t) {
    EXPECT_EQ(a.positions[static_cast<std::size_t>(t)],
              b.positions[static_cast<std::size_t>(t)]);
    EXPECT_EQ(a.rmin_bps[static_cast<std::size_t>(t)],
              b.rmin_bps[static_cast<std::size_t>(t)]);
  }
  const auto c = sim::generate_scenario(cfg, 43);
  EXPECT_NE(a.positions[0], c.positions[0]);
}

TEST(GenerateScenario, ZeroStepFreezesUsers) {
  auto cfg = small_config();
  cfg.step_max_m = 0.0;
  const auto sc = sim::generate_scenario(cfg, 7);
  for (int t = 1; t < sc.periods(); ++t) {
    EXPECT_EQ(sc.positions[static_cast<std::size_t>(t)], sc.positions[0]);
  }
}

TEST(GenerateScenario, UsersStayInsideRoom) {
  auto cfg = small_config();
  cfg.periods = 40;
  const auto sc = sim::generate_scenario(cfg, 3);
  for (const auto& pos : sc.positions) {
    EXPECT_GE(pos.col(0).minCoeff(), 0.0);
    EXPECT_LE(pos.col(0).maxCoeff(), cfg.room_x_m);
    EXPECT_GE(pos.col(1).minCoeff(), 0.0);
    EXPECT_LE(pos.col(1).maxCoeff(), cfg.room_y_m);
  }
}

TEST(GenerateScenario, InitialPositionsApproximatelyUniform) {
  auto cfg = small_config();
  cfg.num_users = 4;
  cfg.periods = 2;
  cfg.window_tau = 1;
  // 250 scenario draws x 4 users = 1000 samples over a 5x5 grid of bins.
  int bins[25] = {};
  for (int s = 0; s < 250; ++s) {
    const auto sc = sim::generate_scenario(cfg, 1000 + static_cast<std::uint64_t>(s));
    for (int u = 0; u < 4; ++u) {
      const int bx = std::min(4, static_cast<int>(sc.positions[0](u, 0) / 1.0));
      const int by = std::min(4, static_cast<int>(sc.positions[0](u, 1) / 0.5));
      ++bins[by * 5 + bx];
    }
  }
  const double expected = 1000.0 / 25.0;
  double chi2 = 0.0;
  for (int b = 0; b < 25; ++b) {
    chi2 += (bins[b] - expected) * (bins[b] - expected) / expected;
  }
  // dof 24; 51.2 is the 0.999 quantile.
  EXPECT_LT(chi2, 55.0);
}

TEST(CandidateRates, FovDeterminesSupport) {
  auto cfg = small_config();
  const auto sc = sim::generate_scenario(cfg, 5);
  const auto ch = sim::compute_channels(sc, 0);
  const Matrix r = sim::candidate_rates(sc, ch);
  for (int u = 0; u < cfg.num_users; ++u) {
    for (int a = 0; a < cfg.num_aps(); ++a) {
      if (ch.in_view[static_cast<std::size_t>(u)][static_cast<std::size_t>(a)]) {
        EXPECT_GT(r(u, a), 0.0);
      } else {
        EXPECT_EQ(r(u, a), 0.0);
      }
    }
  }
}

TEST(RunOffline, SingleUserTracksBestAp) {
  auto cfg = small_config();
  cfg.num_users = 1;
  const auto sc = sim::generate_scenario(cfg, 9);
  const auto snaps = sim::run_offline(sc);
  ASSERT_EQ(static_cast<int>(snaps.size()), cfg.periods);
  for (const auto& s : snaps) {
    int best = 0;
    for (int a = 1; a < cfg.num_aps(); ++a) {
      if (s.rates(0, a) > s.rates(0, best)) best = a;
    }
    EXPECT_EQ(s.oracle_ap[0], best);
  }
}

TEST(RunOffline, StaticScenarioKeepsAssignment) {
  auto cfg = small_config();
  cfg.step_max_m = 0.0;
  const auto sc = sim::generate_scenario(cfg, 13);
  const auto snaps = sim::run_offline(sc);
  for (std::size_t t = 1; t < snaps.size(); ++t) {
    EXPECT_EQ(snaps[t].oracle_ap, snaps[0].oracle_ap);
  }
}

TEST(RunOffline, LabelsMatchIndependentEnumerator) {
  auto cfg = small_config();
  cfg.periods = 4;
  const auto sc = sim::generate_scenario(cfg, 17);
  const auto snaps = sim::run_offline(sc);
  for (const auto& s : snaps) {
    const auto want = testsupport::independent_enumerator(s.rates);
    EXPECT_EQ(s.oracle_ap, want.assignment);
  }
}

TEST(RunOffline, SnapshotInternallyConsistent) {
  const auto sc = sim::generate_scenario(small_config(), 19);
  const auto snaps = sim::run_offline(sc);
  for (const auto& s : snaps) {
    EXPECT_NEAR(s.sum_rate_bps, s.achieved_bps.sum(), 1e-6);
    EXPECT_GE(s.resources.minCoeff(), 0.0);
    EXPECT_LE(s.resources.maxCoeff(), 1.0);
  }
}

TEST(Baselines, SingleUserSingleApAllMethodsAgree) {
  auto cfg = small_config();
  cfg.num_users = 1;
  cfg.ap_grid_x = 1;
  cfg.ap_grid_y = 1;
  cfg.room_x_m = 2.5;  // single AP covers the whole floor
  const auto sc = sim::generate_scenario(cfg, 23);
  const auto snaps = sim::run_offline(sc);
  const auto p2 = sim::run_baseline_p2(sc);
  const auto dist = sim::run_baseline_distance(sc);
  for (std::size_t t = 0; t < snaps.size(); ++t) {
    EXPECT_NEAR(snaps[t].sum_rate_bps, dist[t], 2e-3 * snaps[t].sum_rate_bps);
    EXPECT_NEAR(snaps[t].sum_rate_bps, p2[t], 2e-3 * snaps[t].sum_rate_bps);
  }
}

TEST(Baselines, SymmetricTwoUserInstanceTiesOracle) {
  auto cfg = small_config();
  cfg.num_users = 2;
  cfg.ap_grid_x = 2;
  cfg.ap_grid_y = 1;
  auto sc = sim::generate_scenario(cfg, 29);
  // Place each user straight under one AP with identical generous demands.
  sc.positions[0](0, 0) = sc.aps[0].position.x();
  sc.positions[0](0, 1) = sc.aps[0].position.y();
  sc.positions[0](1, 0) = sc.aps[1].position.x();
  sc.positions[0](1, 1) = sc.aps[1].position.y();
  sc.rmin_bps[0].setConstant(0.2 * kGbps);
  sc.rmax_bps[0].setConstant(1.0 * kGbps);

  const auto ch = sim::compute_channels(sc, 0);
  const Matrix rates = sim::candidate_rates(sc, ch);
  const auto oracle = assoc::brute_force_assoc(rates);
  const auto oracle_out = sim::evaluate_assignment(sc, ch, 0, oracle.assignment);
  const auto dist_out = sim::evaluate_distance(sc, ch, 0);
  EXPECT_NEAR(oracle_out.sum_rate_bps, dist_out.sum_rate_bps,
              2e-3 * oracle_out.sum_rate_bps);
}

TEST(Baselines, OracleDominatesDistanceInLogUtility) {
  auto cfg = small_config();
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    const auto sc = sim::generate_scenario(cfg, seed);
    const auto ch = sim::compute_channels(sc, 0);
    const Matrix rates = sim::candidate_rates(sc, ch);
    const auto oracle = assoc::brute_force_assoc(rates);
    std::vector<Vec3> users, aps;
    for (int u = 0; u < cfg.num_users; ++u) {
      users.push_back(sc.positions[0].row(u).transpose());
    }
    for (const auto& ap : sc.aps) aps.push_back(ap.position);
    const auto dist = assoc::distance_based_assoc(users, aps, cfg.fov_deg);
    EXPECT_GE(oracle.utility, assoc::utility_p3(dist, rates) - 1e-12);
  }
}

TEST(RunOnline, OraclePredictorReproducesOraclePipeline) {
  auto cfg = small_config();
  const auto sc = sim::generate_scenario(cfg, 31);
  const int tau = cfg.window_tau;

  // Inject a predictor that emits the oracle association of period t+1.
  auto est_fn = [&](const Vector&, int t) {
    const auto ch = sim::compute_channels(sc, t);
    const auto oracle = assoc::brute_force_assoc(sim::candidate_rates(sc, ch));
    return sim::assignment_scores(oracle.assignment);
  };
  auto pred_fn = [&](const std::vector<Vector>&, int t) {
    const auto ch = sim::compute_channels(sc, t + 1);
    const auto oracle = assoc::brute_force_assoc(sim::candidate_rates(sc, ch));
    return sim::assignment_scores(oracle.assignment);
  };
  const auto online = sim::run_online_with(sc, tau, est_fn, pred_fn);

  const auto snaps = sim::run_offline(sc);
  ASSERT_FALSE(online.empty());
  for (const auto& pr : online) {
    EXPECT_NEAR(pr.sum_rate_bps,
                snaps[static_cast<std::size_t>(pr.period)].sum_rate_bps, 1e-6)
        << "period " << pr.period;
  }
}

TEST(RunOnline, UntrainedModelsRunWithoutCrashing) {
  auto cfg = small_config();
  const auto sc = sim::generate_scenario(cfg, 37);
  Rng rng(1);
  nn::Hyper hyper;
  hyper.window = cfg.window_tau;
  const sim::FeatureSpec fs = sim::FeatureSpec::from_config(cfg);
  auto est = nn::EstimatorModel::create(cfg.num_users, cfg.num_aps(),
                                        fs.block_len(cfg.num_aps()), hyper, rng);
  auto pred = nn::PredictorModel::create(cfg.num_users, cfg.num_aps(), hyper, rng);
  const auto results = sim::run_online(sc, est, pred);
  EXPECT_EQ(static_cast<int>(results.size()), cfg.periods - cfg.window_tau);
  for (const auto& pr : results) {
    EXPECT_GE(pr.sum_rate_bps, 0.0);
    EXPECT_EQ(static_cast<int>(pr.predicted_ap.size()), cfg.num_users);
  }
}

TEST(DatasetPipeline, SetsHaveExpectedShapesAndGroups) {
  auto cfg = small_config();
  const auto ds = sim::generate_dataset(cfg);
  EXPECT_EQ(static_cast<int>(ds.scenarios.size()), cfg.dataset_scenarios);
  const auto est_set = sim::estimator_set(ds, cfg);
  const sim::FeatureSpec fs = sim::FeatureSpec::from_config(cfg);
  EXPECT_EQ(est_set.inputs.cols(),
            cfg.num_users * fs.block_len(cfg.num_aps()));
  EXPECT_EQ(est_set.inputs.rows(),
            static_cast<Eigen::Index>(ds.snapshot_count()));
  EXPECT_GE(est_set.inputs.minCoeff(), 0.0);
  EXPECT_LE(est_set.inputs.maxCoeff(), 1.0);

  const auto pred_set = sim::predictor_set(ds, cfg.window_tau);
  EXPECT_EQ(pred_set.histories.size(),
            static_cast<std::size_t>(cfg.dataset_scenarios *
                                     (cfg.periods - cfg.window_tau)));
  // Group ids follow scenarios.
  EXPECT_EQ(pred_set.group_of_row.front(), 0);
  EXPECT_EQ(pred_set.group_of_row.back(), cfg.dataset_scenarios - 1);
}

TEST(DatasetIo, RoundTripsAndVerifies) {
  auto cfg = small_config();
  cfg.dataset_scenarios = 1;
  cfg.periods = 3;
  const auto ds = sim::generate_dataset(cfg);
  const std::string path = "/tmp/owcsim_test_dataset.json";
  io::save_dataset(ds, path);
  const auto loaded = io::load_dataset(path);
  EXPECT_EQ(loaded.k_users, ds.k_users);
  EXPECT_EQ(loaded.config_hash, ds.config_hash);
  ASSERT_EQ(loaded.scenarios.size(), ds.scenarios.size());
  EXPECT_EQ(loaded.scenarios[0].snapshots[1].oracle_ap,
            ds.scenarios[0].snapshots[1].oracle_ap);
  EXPECT_EQ(loaded.scenarios[0].snapshots[2].rates,
            ds.scenarios[0].snapshots[2].rates);
  EXPECT_TRUE(io::verify_file(path));
  std::filesystem::remove(path);
}

TEST(ModelIo, RoundTripsEstimatorAndPredictor) {
  Rng rng(41);
  nn::Hyper hyper;
  hyper.hidden_width = 6;
  hyper.window = 3;
  auto est = nn::EstimatorModel::create(2, 2, 7, hyper, rng);
  auto pred = nn::PredictorModel::create(2, 2, hyper, rng);
  const auto cfg = small_config();
  const auto cfg_json = config::to_json(cfg);
  const std::string hash = config::config_hash_hex(cfg);

  io::save_estimator(est, hash, cfg_json, "/tmp/owcsim_test_est.json");
  io::save_predictor(pred, hash, cfg_json, "/tmp/owcsim_test_pred.json");
  const auto est2 = io::load_estimator("/tmp/owcsim_test_est.json");
  const auto pred2 = io::load_predictor("/tmp/owcsim_test_pred.json");
  EXPECT_EQ(est2.params(), est.params());
  EXPECT_EQ(pred2.params(), pred.params());
  EXPECT_EQ(est2.block_len(), est.block_len());
  EXPECT_EQ(pred2.window(), pred.window());
  EXPECT_TRUE(io::verify_file("/tmp/owcsim_test_est.json"));

  // Tampering with the stored config must break verification.
  auto body = io::detail::read_text_file("/tmp/owcsim_test_pred.json");
  const auto pos = body.find("\"room_x_m\": 5.0");
  ASSERT_NE(pos, std::string::npos);
  body.replace(pos, 15, "\"room_x_m\": 6.0");
  io::detail::write_text_file("/tmp/owcsim_test_pred.json", body);
  EXPECT_FALSE(io::verify_file("/tmp/owcsim_test_pred.json"));
  std::filesystem::remove("/tmp/owcsim_test_est.json");
  std::filesystem::remove("/tmp/owcsim_test_pred.json");
}

TEST(Config, UnknownKeysEnumerated) {
  nlohmann::json j = config::to_json(config::RunConfig{});
  j["geometry"]["bogus_key_m"] = 1.0;
  j["whole_bogus"] = 2;
  try {
    config::from_json(j);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("geometry.bogus_key_m"), std::string::npos);
    EXPECT_NE(msg.find("whole_bogus"), std::string::npos);
  }
}

TEST(Config, AllViolationsEnumerated) {
  nlohmann::json j = config::to_json(config::RunConfig{});
  j["optics"]["beam_waist_um"] = -1.0;
  j["population"]["num_users"] = 0;
  j["nn"]["momentum"] = 1.5;
  try {
    config::from_json(j);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("beam_waist_um"), std::string::npos);
    EXPECT_NE(msg.find("num_users"), std::string::npos);
    EXPECT_NE(msg.find("momentum"), std::string::npos);
  }
}

TEST(Config, CanonicalHashStable) {
  const config::RunConfig a;
  const config::RunConfig b;
  EXPECT_EQ(config::config_hash_hex(a), config::config_hash_hex(b));
  config::RunConfig c;
  c.beam_waist_um = 7.5;
  EXPECT_NE(config::config_hash_hex(a), config::config_hash_hex(c));
}

TEST(Sweep, SinglePointProducesOneRowPerMethod) {
  auto cfg = small_config();
  cfg.sweep_seeds = 2;
  cfg.periods = 4;
  cfg.window_tau = 2;
  const auto rows = sim::sweep_beam_waist(cfg, {5.0}, std::nullopt);
  ASSERT_EQ(rows.size(), 3u);  // oracle, p2, distance (no models)
  EXPECT_EQ(rows[0].method, "oracle");
  EXPECT_EQ(rows[1].method, "p2");
  EXPECT_EQ(rows[2].method, "distance");
  const auto rows2 = sim::sweep_beam_waist(cfg, {5.0}, std::nullopt);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].mean_sum_rate_gbps, rows2[i].mean_sum_rate_gbps);
  }
}

}  // namespace
}  // namespace owc
