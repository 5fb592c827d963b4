#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "owcsim/common.hpp"

namespace owc::config {

/// Resolved run configuration. Key names carry explicit units; the JSON
/// schema below mirrors this struct one to one.
struct RunConfig {
  // geometry
  double room_x_m = 5.0;
  double room_y_m = 5.0;
  double room_z_m = 3.0;
  double floor_drop_m = 2.0;  // communication floor below the ceiling
  int ap_grid_x = 2;
  int ap_grid_y = 2;
  int transmitters_per_ap = 2;
  double tx_spacing_m = 0.03;
  // population
  int num_users = 6;
  int periods = 12;
  double step_max_m = 0.5;
  // demands
  double rmin_low_gbps = 0.5;
  double rmin_high_gbps = 2.0;
  double rmax_factor_low = 3.0;
  double rmax_factor_high = 6.0;
  double ap_capacity_gbps = 8.0;
  // optics
  double beam_waist_um = 5.0;
  double wavelength_nm = 830.0;
  double tx_power_w = 1.0;
  double photodiode_area_mm2 = 15.0;
  int num_photodiodes = 4;
  double responsivity_a_per_w = 0.9;
  double fov_deg = 45.0;
  double misalignment_gamma = 0.3;
  // bia
  double bandwidth_ghz = 5.0;
  double laser_noise_db_hz = -155.0;
  double snr_offset_db = 0.0;
  // allocator
  double allocator_step = 1e-2;
  double allocator_tol = 1e-6;
  double allocator_tol_feas = 1e-3;
  int allocator_max_iters = 50000;
  // nn
  int estimator_hidden_width = 0;  // 0 -> 4 K L
  int predictor_hidden_width = 0;  // 0 -> 2 K L
  int estimator_epochs = 60;
  int predictor_epochs = 80;
  double learning_rate = 1e-2;
  double momentum = 0.9;
  int batch_size = 32;
  int window_tau = 4;
  double train_fraction = 0.9;
  bool conv_front = false;
  bool include_rate_features = true;
  double feature_rate_scale_gbps = 25.0;
  double feature_demand_scale_gbps = 10.0;
  // sim
  int dataset_scenarios = 1250;
  int sweep_seeds = 20;
  std::vector<double> beam_waist_um_list = {5.0, 7.5, 10.0, 12.5, 15.0};
  std::vector<double> snr_db_list = {-6.0, -3.0, 0.0, 3.0, 6.0, 9.0};
  std::uint64_t seed = 1;

  double bandwidth_hz() const { return bandwidth_ghz * 1e9; }
  double noise_power() const {
    return std::pow(10.0, laser_noise_db_hz / 10.0) * bandwidth_hz();
  }
  /// Noise-normalized per-stream power including the SNR sweep offset.
  double p_str_normalized() const {
    const double p = tx_power_w / static_cast<double>(transmitters_per_ap);
    return p * std::pow(10.0, snr_offset_db / 10.0);
  }
  int num_aps() const { return ap_grid_x * ap_grid_y; }
};

namespace detail {

struct Reader {
  const nlohmann::json& j;
  std::string scope;
  std::vector<std::string>& errors;
  std::set<std::string> seen;

  bool has(const std::string& key) { return j.contains(key); }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen.insert(key);
    if (!j.contains(key)) return;
    try {
      out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      errors.push_back(scope + key + ": wrong type");
    }
  }

  void finish() {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!seen.contains(it.key())) {
        errors.push_back(scope + it.key() + ": unknown key");
      }
    }
  }
};

inline void require(bool ok, const std::string& what,
                    std::vector<std::string>& errors) {
  if (!ok) errors.push_back(what);
}

}  // namespace detail

inline void validate(const RunConfig& c, std::vector<std::string>& errors) {
  using detail::require;
  require(c.room_x_m > 0 && c.room_y_m > 0 && c.room_z_m > 0,
          "geometry: room dimensions must be positive", errors);
  require(c.floor_drop_m > 0 && c.floor_drop_m < c.room_z_m,
          "geometry.floor_drop_m: must lie inside the room height", errors);
  require(c.ap_grid_x >= 1 && c.ap_grid_y >= 1,
          "geometry.ap_grid: at least one AP per axis", errors);
  require(c.transmitters_per_ap >= 2,
          "geometry.transmitters_per_ap: need at least 2", errors);
  require(c.tx_spacing_m > 0, "geometry.tx_spacing_m: must be positive", errors);
  require(c.num_users >= 1, "population.num_users: must be >= 1", errors);
  require(c.periods >= 2, "population.periods: must be >= 2", errors);
  require(c.step_max_m >= 0, "population.step_max_m: must be >= 0", errors);
  require(c.rmin_low_gbps > 0 && c.rmin_high_gbps >= c.rmin_low_gbps,
          "demands.rmin: need 0 < low <= high", errors);
  require(c.rmax_factor_low >= 1.0 && c.rmax_factor_high >= c.rmax_factor_low,
          "demands.rmax_factor: need 1 <= low <= high", errors);
  require(c.ap_capacity_gbps > 0, "demands.ap_capacity_gbps: must be positive",
          errors);
  require(c.beam_waist_um > 0, "optics.beam_waist_um: must be positive", errors);
  require(c.wavelength_nm > 0, "optics.wavelength_nm: must be positive", errors);
  require(c.tx_power_w > 0, "optics.tx_power_w: must be positive", errors);
  require(c.photodiode_area_mm2 > 0,
          "optics.photodiode_area_mm2: must be positive", errors);
  require(c.num_photodiodes >= 1, "optics.num_photodiodes: must be >= 1", errors);
  require(c.responsivity_a_per_w > 0,
          "optics.responsivity_a_per_w: must be positive", errors);
  require(c.fov_deg > 0 && c.fov_deg <= 90, "optics.fov_deg: must be in (0, 90]",
          errors);
  require(c.misalignment_gamma >= 0 && c.misalignment_gamma < 1,
          "optics.misalignment_gamma: must be in [0, 1)", errors);
  require(c.bandwidth_ghz > 0, "bia.bandwidth_ghz: must be positive", errors);
  require(c.allocator_step > 0, "allocator.step: must be positive", errors);
  require(c.allocator_tol > 0, "allocator.tol: must be positive", errors);
  require(c.allocator_tol_feas > 0, "allocator.tol_feas: must be positive",
          errors);
  require(c.allocator_max_iters >= 1, "allocator.max_iters: must be >= 1",
          errors);
  require(c.estimator_hidden_width >= 0 && c.predictor_hidden_width >= 0,
          "nn.hidden_width: must be >= 0", errors);
  require(c.estimator_epochs >= 1 && c.predictor_epochs >= 1,
          "nn.epochs: must be >= 1", errors);
  require(c.learning_rate > 0, "nn.learning_rate: must be positive", errors);
  require(c.momentum >= 0 && c.momentum < 1, "nn.momentum: must be in [0, 1)",
          errors);
  require(c.batch_size >= 1, "nn.batch_size: must be >= 1", errors);
  require(c.window_tau >= 1, "nn.window_tau: must be >= 1", errors);
  require(c.window_tau < c.periods,
          "nn.window_tau: must be smaller than population.periods", errors);
  require(c.train_fraction > 0 && c.train_fraction < 1,
          "nn.train_fraction: must be in (0, 1)", errors);
  require(c.feature_rate_scale_gbps > 0 && c.feature_demand_scale_gbps > 0,
          "nn.feature scales: must be positive", errors);
  require(c.dataset_scenarios >= 1, "sim.dataset_scenarios: must be >= 1",
          errors);
  require(c.sweep_seeds >= 1, "sim.sweep_seeds: must be >= 1", errors);
  require(!c.beam_waist_um_list.empty(), "sweep.beam_waist_um_list: nonempty",
          errors);
  for (double w : c.beam_waist_um_list) {
    require(w > 0, "sweep.beam_waist_um_list: entries must be positive", errors);
  }
  require(!c.snr_db_list.empty(), "sweep.snr_db_list: nonempty", errors);
}

inline RunConfig from_json(const nlohmann::json& j) {
  RunConfig c;
  std::vector<std::string> errors;
  std::set<std::string> known = {"geometry",  "population", "demands", "optics",
                                 "bia",       "allocator",  "nn",      "sim",
                                 "sweep",     "seed"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.contains(it.key())) errors.push_back(it.key() + ": unknown key");
  }
  if (j.contains("seed")) {
    try {
      c.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception&) {
      errors.push_back("seed: wrong type");
    }
  }
  auto section = [&](const char* name) -> const nlohmann::json* {
    if (!j.contains(name)) return nullptr;
    if (!j.at(name).is_object()) {
      errors.push_back(std::string(name) + ": must be an object");
      return nullptr;
    }
    return &j.at(name);
  };
  if (const auto* s = section("geometry")) {
    detail::Reader r{*s, "geometry.", errors, {}};
    r.get("room_x_m", c.room_x_m);
    r.get("room_y_m", c.room_y_m);
    r.get("room_z_m", c.room_z_m);
    r.get("floor_drop_m", c.floor_drop_m);
    r.get("ap_grid_x", c.ap_grid_x);
    r.get("ap_grid_y", c.ap_grid_y);
    r.get("transmitters_per_ap", c.transmitters_per_ap);
    r.get("tx_spacing_m", c.tx_spacing_m);
    r.finish();
  }
  if (const auto* s = section("population")) {
    detail::Reader r{*s, "population.", errors, {}};
    r.get("num_users", c.num_users);
    r.get("periods", c.periods);
    r.get("step_max_m", c.step_max_m);
    r.finish();
  }
  if (const auto* s = section("demands")) {
    detail::Reader r{*s, "demands.", errors, {}};
    r.get("rmin_low_gbps", c.rmin_low_gbps);
    r.get("rmin_high_gbps", c.rmin_high_gbps);
    r.get("rmax_factor_low", c.rmax_factor_low);
    r.get("rmax_factor_high", c.rmax_factor_high);
    r.get("ap_capacity_gbps", c.ap_capacity_gbps);
    r.finish();
  }
  if (const auto* s = section("optics")) {
    detail::Reader r{*s, "optics.", errors, {}};
    r.get("beam_waist_um", c.beam_waist_um);
    r.get("wavelength_nm", c.wavelength_nm);
    r.get("tx_power_w", c.tx_power_w);
    r.get("photodiode_area_mm2", c.photodiode_area_mm2);
    r.get("num_photodiodes", c.num_photodiodes);
    r.get("responsivity_a_per_w", c.responsivity_a_per_w);
    r.get("fov_deg", c.fov_deg);
    r.get("misalignment_gamma", c.misalignment_gamma);
    r.finish();
  }
  if (const auto* s = section("bia")) {
    detail::Reader r{*s, "bia.", errors, {}};
    r.get("bandwidth_ghz", c.bandwidth_ghz);
    r.get("laser_noise_db_hz", c.laser_noise_db_hz);
    r.get("snr_offset_db", c.snr_offset_db);
    r.finish();
  }
  if (const auto* s = section("allocator")) {
    detail::Reader r{*s, "allocator.", errors, {}};
    r.get("step", c.allocator_step);
    r.get("tol", c.allocator_tol);
    r.get("tol_feas", c.allocator_tol_feas);
    r.get("max_iters", c.allocator_max_iters);
    r.finish();
  }
  if (const auto* s = section("nn")) {
    detail::Reader r{*s, "nn.", errors, {}};
    r.get("estimator_hidden_width", c.estimator_hidden_width);
    r.get("predictor_hidden_width", c.predictor_hidden_width);
    r.get("estimator_epochs", c.estimator_epochs);
    r.get("predictor_epochs", c.predictor_epochs);
    r.get("learning_rate", c.learning_rate);
    r.get("momentum", c.momentum);
    r.get("batch_size", c.batch_size);
    r.get("window_tau", c.window_tau);
    r.get("train_fraction", c.train_fraction);
    r.get("conv_front", c.conv_front);
    r.get("include_rate_features", c.include_rate_features);
    r.get("feature_rate_scale_gbps", c.feature_rate_scale_gbps);
    r.get("feature_demand_scale_gbps", c.feature_demand_scale_gbps);
    r.finish();
  }
  if (const auto* s = section("sim")) {
    detail::Reader r{*s, "sim.", errors, {}};
    r.get("dataset_scenarios", c.dataset_scenarios);
    r.get("sweep_seeds", c.sweep_seeds);
    r.finish();
  }
  if (const auto* s = section("sweep")) {
    detail::Reader r{*s, "sweep.", errors, {}};
    r.get("beam_waist_um_list", c.beam_waist_um_list);
    r.get("snr_db_list", c.snr_db_list);
    r.finish();
  }
  validate(c, errors);
  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
  return c;
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["geometry"] = {{"room_x_m", c.room_x_m},
                   {"room_y_m", c.room_y_m},
                   {"room_z_m", c.room_z_m},
                   {"floor_drop_m", c.floor_drop_m},
                   {"ap_grid_x", c.ap_grid_x},
                   {"ap_grid_y", c.ap_grid_y},
                   {"transmitters_per_ap", c.transmitters_per_ap},
                   {"tx_spacing_m", c.tx_spacing_m}};
  j["population"] = {{"num_users", c.num_users},
                     {"periods", c.periods},
                     {"step_max_m", c.step_max_m}};
  j["demands"] = {{"rmin_low_gbps", c.rmin_low_gbps},
                  {"rmin_high_gbps", c.rmin_high_gbps},
                  {"rmax_factor_low", c.rmax_factor_low},
                  {"rmax_factor_high", c.rmax_factor_high},
                  {"ap_capacity_gbps", c.ap_capacity_gbps}};
  j["optics"] = {{"beam_waist_um", c.beam_waist_um},
                 {"wavelength_nm", c.wavelength_nm},
                 {"tx_power_w", c.tx_power_w},
                 {"photodiode_area_mm2", c.photodiode_area_mm2},
                 {"num_photodiodes", c.num_photodiodes},
                 {"responsivity_a_per_w", c.responsivity_a_per_w},
                 {"fov_deg", c.fov_deg},
                 {"misalignment_gamma", c.misalignment_gamma}};
  j["bia"] = {{"bandwidth_ghz", c.bandwidth_ghz},
              {"laser_noise_db_hz", c.laser_noise_db_hz},
              {"snr_offset_db", c.snr_offset_db}};
  j["allocator"] = {{"step", c.allocator_step},
                    {"tol", c.allocator_tol},
                    {"tol_feas", c.allocator_tol_feas},
                    {"max_iters", c.allocator_max_iters}};
  j["nn"] = {{"estimator_hidden_width", c.estimator_hidden_width},
             {"predictor_hidden_width", c.predictor_hidden_width},
             {"estimator_epochs", c.estimator_epochs},
             {"predictor_epochs", c.predictor_epochs},
             {"learning_rate", c.learning_rate},
             {"momentum", c.momentum},
             {"batch_size", c.batch_size},
             {"window_tau", c.window_tau},
             {"train_fraction", c.train_fraction},
             {"conv_front", c.conv_front},
             {"include_rate_features", c.include_rate_features},
             {"feature_rate_scale_gbps", c.feature_rate_scale_gbps},
             {"feature_demand_scale_gbps", c.feature_demand_scale_gbps}};
  j["sim"] = {{"dataset_scenarios", c.dataset_scenarios},
              {"sweep_seeds", c.sweep_seeds}};
  j["sweep"] = {{"beam_waist_um_list", c.beam_waist_um_list},
                {"snr_db_list", c.snr_db_list}};
  return j;
}

/// Canonical single-line serialization (sorted keys); hashed into outputs.
inline std::string canonical_string(const RunConfig& c) {
  return to_json(c).dump();
}

inline std::string config_hash_hex(const RunConfig& c) {
  return hex64(fnv1a(canonical_string(c)));
}

inline RunConfig load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  return from_json(j);
}

}  // namespace owc::config
