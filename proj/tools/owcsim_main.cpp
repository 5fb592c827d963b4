// Batch front end: dataset generation, model training, online simulation,
// figure sweeps and output verification.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "owcsim/config.hpp"
#include "owcsim/io.hpp"
#include "owcsim/nn.hpp"
#include "owcsim/sim.hpp"

namespace {

using namespace owc;

int g_verbosity = 1;

void progress(const std::string& line) {
  if (g_verbosity >= 1) std::cout << "owcsim: " << line << "\n";
}

std::string one_line(std::string msg) {
  for (auto& c : msg) {
    if (c == '\n') c = ';';
  }
  return msg;
}

config::RunConfig load_config_or_die(const std::string& path,
                                     std::optional<std::uint64_t> seed_override) {
  config::RunConfig cfg = config::load_file(path);
  if (seed_override) cfg.seed = *seed_override;
  progress("config_hash=" + config::config_hash_hex(cfg) +
           " seed=" + std::to_string(cfg.seed));
  return cfg;
}

void echo_epochs(const nn::TrainReport& report, const std::string& which) {
  for (std::size_t e = 0; e < report.train_mse.size(); ++e) {
    progress(which + " epoch " + std::to_string(e) +
             " train_mse=" + io::format_double(report.train_mse[e]) +
             " val_mse=" + io::format_double(report.val_mse[e]));
  }
}

int cmd_gen_dataset(const std::string& config_path,
                    std::optional<std::uint64_t> seed, const std::string& out) {
  const config::RunConfig cfg = load_config_or_die(config_path, seed);
  sim::Dataset ds;
  ds.k_users = cfg.num_users;
  ds.n_aps = cfg.num_aps();
  ds.lv = cfg.transmitters_per_ap;
  ds.periods = cfg.periods;
  ds.base_seed = cfg.seed;
  ds.config_hash = config::config_hash_hex(cfg);
  ds.config_canonical = config::canonical_string(cfg);
  for (int s = 0; s < cfg.dataset_scenarios; ++s) {
    const std::uint64_t sc_seed = cfg.seed + static_cast<std::uint64_t>(s);
    const sim::Scenario sc = sim::generate_scenario(cfg, sc_seed);
    sim::ScenarioRecord rec;
    rec.seed = sc_seed;
    rec.snapshots = sim::run_offline(sc);
    ds.scenarios.push_back(std::move(rec));
    if (g_verbosity >= 2) {
      for (const auto& snap : ds.scenarios.back().snapshots) {
        progress("scenario " + std::to_string(s) + " period " +
                 std::to_string(snap.period) + " sum_rate_gbps=" +
                 io::format_double(snap.sum_rate_bps / kGbps));
      }
    } else {
      progress("scenario " + std::to_string(s + 1) + "/" +
               std::to_string(cfg.dataset_scenarios) + " done");
    }
  }
  io::save_dataset(ds, out);
  progress("dataset written: " + out + " (" +
           std::to_string(ds.snapshot_count()) + " snapshots)");
  return 0;
}

int cmd_train(const std::string& dataset_path, const std::string& out_estimator,
              const std::string& out_predictor, const std::string& report_prefix) {
  const sim::Dataset ds = io::load_dataset(dataset_path);
  const config::RunConfig cfg =
      config::from_json(nlohmann::json::parse(ds.config_canonical));
  progress("config_hash=" + ds.config_hash +
           " snapshots=" + std::to_string(ds.snapshot_count()));

  const auto est_set = sim::estimator_set(ds, cfg);
  const sim::FeatureSpec fs = sim::FeatureSpec::from_config(cfg);
  auto [est, est_report] =
      nn::train_estimator(est_set, ds.k_users, ds.n_aps,
                          fs.block_len(ds.n_aps), sim::estimator_hyper(cfg));
  echo_epochs(est_report, "estimator");

  const auto pred_set = sim::predictor_set(ds, cfg.window_tau);
  auto [pred, pred_report] =
      nn::train_predictor(pred_set, ds.k_users, ds.n_aps, sim::predictor_hyper(cfg));
  echo_epochs(pred_report, "predictor");

  const auto cfg_json = nlohmann::json::parse(ds.config_canonical);
  io::save_estimator(est, ds.config_hash, cfg_json, out_estimator);
  io::save_predictor(pred, ds.config_hash, cfg_json, out_predictor);
  if (!report_prefix.empty()) {
    io::save_train_report(est_report, "estimator", ds.config_hash,
                          report_prefix + ".estimator.json");
    io::save_train_report(pred_report, "predictor", ds.config_hash,
                          report_prefix + ".predictor.json");
  }
  progress("models written: " + out_estimator + ", " + out_predictor);
  return 0;
}

int cmd_simulate(const std::string& config_path,
                 std::optional<std::uint64_t> seed,
                 const std::string& estimator_path,
                 const std::string& predictor_path, const std::string& out) {
  const config::RunConfig cfg = load_config_or_die(config_path, seed);
  const auto est = io::load_estimator(estimator_path);
  const auto pred = io::load_predictor(predictor_path);
  const sim::Scenario sc =
      sim::generate_scenario(cfg, cfg.seed + sim::kEvalSeedOffset);

  const auto online = sim::run_online(sc, est, pred);
  std::vector<double> oracle_sums, p2_sums, dist_sums;
  for (int t = 0; t < sc.periods(); ++t) {
    const auto ch = sim::compute_channels(sc, t);
    const Matrix rates = sim::candidate_rates(sc, ch);
    const auto oracle = assoc::brute_force_assoc(rates);
    oracle_sums.push_back(
        sim::evaluate_assignment(sc, ch, t, oracle.assignment).sum_rate_bps);
    p2_sums.push_back(sim::evaluate_p2(sc, ch, t).sum_rate_bps);
    dist_sums.push_back(sim::evaluate_distance(sc, ch, t).sum_rate_bps);
    progress("period " + std::to_string(t) + " oracle_gbps=" +
             io::format_double(oracle_sums.back() / kGbps));
  }
  io::detail::write_text_file(
      out, io::simulate_csv(online, oracle_sums, p2_sums, dist_sums, cfg));
  progress("results written: " + out);
  return 0;
}

int cmd_sweep(const std::string& config_path, std::optional<std::uint64_t> seed,
              const std::string& sweep_axis, const std::string& estimator_path,
              const std::string& predictor_path, const std::string& out) {
  const config::RunConfig cfg = load_config_or_die(config_path, seed);
  std::optional<sim::TrainedModels> models;
  if (!estimator_path.empty() && !predictor_path.empty()) {
    models = sim::TrainedModels{io::load_estimator(estimator_path),
                                io::load_predictor(predictor_path)};
  }
  std::vector<sim::SweepRow> rows;
  std::string axis;
  if (sweep_axis == "beam_waist") {
    axis = "beam_waist_um";
    rows = sim::sweep_beam_waist(cfg, cfg.beam_waist_um_list, models);
  } else if (sweep_axis == "snr") {
    axis = "snr_db";
    rows = sim::sweep_snr(cfg, cfg.snr_db_list, models);
  } else {
    throw ConfigError("unknown sweep axis: " + sweep_axis +
                      " (expected beam_waist or snr)");
  }
  for (const auto& r : rows) {
    progress("sweep " + axis + "=" + io::format_double(r.value) + " " + r.method +
             " mean_gbps=" + io::format_double(r.mean_sum_rate_gbps));
  }
  io::detail::write_text_file(out, io::sweep_csv(rows, axis, cfg));
  progress("results written: " + out);
  return 0;
}

int cmd_verify(const std::string& path) {
  std::string detail;
  const bool ok = io::verify_file(path, &detail);
  if (ok) {
    progress("verify ok: " + path + " (" + detail + ")");
    return 0;
  }
  std::cerr << "ERROR HASH_MISMATCH: " << path << " " << detail << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete-time optical wireless network simulator and optimizer"};
  app.require_subcommand(1);

  std::string config_path, dataset_path, out_path, estimator_path, predictor_path;
  std::string report_prefix, sweep_axis, verify_path;
  std::optional<std::uint64_t> seed;
  app.add_option("--verbosity", g_verbosity, "0 quiet, 1 progress, 2 detailed");

  auto* gen = app.add_subcommand("gen-dataset", "Generate an offline oracle dataset");
  gen->add_option("--config", config_path, "Run configuration (JSON)")->required();
  gen->add_option("--seed", seed, "Override the config seed");
  gen->add_option("--out", out_path, "Output dataset path")->required();

  auto* train = app.add_subcommand("train", "Train estimator and predictor from a dataset");
  train->add_option("--dataset", dataset_path, "Dataset produced by gen-dataset")->required();
  train->add_option("--out-estimator", estimator_path, "Estimator model output")->required();
  train->add_option("--out-predictor", predictor_path, "Predictor model output")->required();
  train->add_option("--out-report", report_prefix, "Train report path prefix");

  auto* simc = app.add_subcommand("simulate", "Run the online loop against baselines");
  simc->add_option("--config", config_path, "Run configuration (JSON)")->required();
  simc->add_option("--seed", seed, "Override the config seed");
  simc->add_option("--estimator", estimator_path, "Trained estimator")->required();
  simc->add_option("--predictor", predictor_path, "Trained predictor")->required();
  simc->add_option("--out", out_path, "Results CSV path")->required();

  auto* sweep = app.add_subcommand("sweep", "Sweep beam waist or SNR");
  sweep->add_option("--config", config_path, "Run configuration (JSON)")->required();
  sweep->add_option("--seed", seed, "Override the config seed");
  sweep->add_option("--sweep", sweep_axis, "beam_waist or snr")->required();
  sweep->add_option("--estimator", estimator_path, "Trained estimator (optional)");
  sweep->add_option("--predictor", predictor_path, "Trained predictor (optional)");
  sweep->add_option("--out", out_path, "Results CSV path")->required();

  auto* verify = app.add_subcommand("verify", "Check the embedded config hash of an output file");
  verify->add_option("--in", verify_path, "File to verify")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_dataset(config_path, seed, out_path);
    if (train->parsed()) {
      return cmd_train(dataset_path, estimator_path, predictor_path, report_prefix);
    }
    if (simc->parsed()) {
      return cmd_simulate(config_path, seed, estimator_path, predictor_path, out_path);
    }
    if (sweep->parsed()) {
      return cmd_sweep(config_path, seed, sweep_axis, estimator_path,
                       predictor_path, out_path);
    }
    if (verify->parsed()) return cmd_verify(verify_path);
  } catch (const owc::ConfigError& e) {
    const std::string msg = e.what();
    const bool missing = msg.find("cannot open config file") != std::string::npos;
    std::cerr << "ERROR " << (missing ? "CONFIG_NOT_FOUND" : "CONFIG_INVALID")
              << ": " << one_line(msg) << "\n";
    return 2;
  } catch (const owc::io::IoError& e) {
    std::cerr << "ERROR IO_ERROR: " << one_line(e.what()) << "\n";
    return 3;
  } catch (const owc::ShapeError& e) {
    std::cerr << "ERROR SHAPE_MISMATCH: " << one_line(e.what()) << "\n";
    return 4;
  } catch (const owc::SizeError& e) {
    std::cerr << "ERROR SIZE_GUARD: " << one_line(e.what()) << "\n";
    return 5;
  } catch (const owc::nn::NanLossError& e) {
    std::cerr << "ERROR TRAIN_DIVERGED: " << one_line(e.what()) << "\n";
    return 6;
  } catch (const std::exception& e) {
    std::cerr << "ERROR INTERNAL: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 0;
}
