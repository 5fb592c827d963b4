#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "owcsim/config.hpp"
#include "owcsim/nn.hpp"
#include "owcsim/sim.hpp"

namespace owc::io {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Matrix(0, 0);
  const auto cols = static_cast<Eigen::Index>(j.at(0).size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(i, c) = j.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(c)).get<double>();
    }
  }
  return m;
}

inline nlohmann::json vector_to_json(const Vector& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Vector vector_from_json(const nlohmann::json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v[i] = j.at(static_cast<std::size_t>(i)).get<double>();
  }
  return v;
}

inline void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << body;
  if (!out) throw IoError("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline nlohmann::json load_json(const std::string& path, const char* format) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("parse error in ") + path + ": " + e.what());
  }
  if (j.value("format", "") != format) {
    throw IoError(std::string("unexpected file format in ") + path +
                  " (want " + format + ")");
  }
  return j;
}

}  // namespace detail

inline void save_dataset(const sim::Dataset& ds, const std::string& path) {
  nlohmann::json j;
  j["format"] = "owcsim-dataset";
  j["version"] = 1;
  j["config_hash"] = ds.config_hash;
  j["config"] = nlohmann::json::parse(ds.config_canonical);
  j["k_users"] = ds.k_users;
  j["n_aps"] = ds.n_aps;
  j["lv"] = ds.lv;
  j["periods"] = ds.periods;
  j["base_seed"] = ds.base_seed;
  nlohmann::json scenarios = nlohmann::json::array();
  for (const auto& scr : ds.scenarios) {
    nlohmann::json snaps = nlohmann::json::array();
    for (const auto& s : scr.snapshots) {
      snaps.push_back({{"period", s.period},
                       {"rates_bps", detail::matrix_to_json(s.rates)},
                       {"oracle_ap", s.oracle_ap},
                       {"resources", detail::matrix_to_json(s.resources)},
                       {"achieved_bps", detail::vector_to_json(s.achieved_bps)},
                       {"sum_rate_bps", s.sum_rate_bps},
                       {"alloc_converged", s.alloc_converged},
                       {"capacity_violated", s.capacity_violated},
                       {"positions_m", detail::matrix_to_json(s.positions)},
                       {"rmin_bps", detail::vector_to_json(s.rmin_bps)},
                       {"rmax_bps", detail::vector_to_json(s.rmax_bps)}});
    }
    scenarios.push_back({{"seed", scr.seed}, {"snapshots", std::move(snaps)}});
  }
  j["scenarios"] = std::move(scenarios);
  detail::write_text_file(path, j.dump(1) + "\n");
}

inline sim::Dataset load_dataset(const std::string& path) {
  const nlohmann::json j = detail::load_json(path, "owcsim-dataset");
  sim::Dataset ds;
  ds.k_users = j.at("k_users").get<int>();
  ds.n_aps = j.at("n_aps").get<int>();
  ds.lv = j.at("lv").get<int>();
  ds.periods = j.at("periods").get<int>();
  ds.base_seed = j.at("base_seed").get<std::uint64_t>();
  ds.config_hash = j.at("config_hash").get<std::string>();
  ds.config_canonical = j.at("config").dump();
  for (const auto& scr : j.at("scenarios")) {
    sim::ScenarioRecord rec;
    rec.seed = scr.at("seed").get<std::uint64_t>();
    for (const auto& sj : scr.at("snapshots")) {
      sim::Snapshot s;
      s.period = sj.at("period").get<int>();
      s.rates = detail::matrix_from_json(sj.at("rates_bps"));
      s.oracle_ap = sj.at("oracle_ap").get<std::vector<int>>();
      s.resources = detail::matrix_from_json(sj.at("resources"));
      s.achieved_bps = detail::vector_from_json(sj.at("achieved_bps"));
      s.sum_rate_bps = sj.at("sum_rate_bps").get<double>();
      s.alloc_converged = sj.at("alloc_converged").get<bool>();
      s.capacity_violated = sj.at("capacity_violated").get<bool>();
      s.positions = detail::matrix_from_json(sj.at("positions_m"));
      s.rmin_bps = detail::vector_from_json(sj.at("rmin_bps"));
      s.rmax_bps = detail::vector_from_json(sj.at("rmax_bps"));
      rec.snapshots.push_back(std::move(s));
    }
    ds.scenarios.push_back(std::move(rec));
  }
  return ds;
}

inline void save_estimator(const nn::EstimatorModel& m, const std::string& config_hash,
                           const nlohmann::json& config, const std::string& path) {
  nlohmann::json j;
  j["format"] = "owcsim-estimator";
  j["version"] = 1;
  j["config_hash"] = config_hash;
  j["config"] = config;
  j["k_users"] = m.k_users();
  j["n_aps"] = m.n_aps();
  j["block_len"] = m.block_len();
  j["hidden_width"] = m.hidden_width();
  j["conv_front"] = m.conv_front();
  j["conv_filters"] = m.conv_filters();
  j["seed"] = m.seed();
  j["params"] = detail::vector_to_json(m.params());
  detail::write_text_file(path, j.dump(1) + "\n");
}

inline nn::EstimatorModel load_estimator(const std::string& path) {
  const nlohmann::json j = detail::load_json(path, "owcsim-estimator");
  return nn::EstimatorModel::restore(
      j.at("k_users").get<int>(), j.at("n_aps").get<int>(),
      j.at("block_len").get<int>(), j.at("hidden_width").get<int>(),
      j.at("conv_front").get<bool>(), j.at("conv_filters").get<int>(),
      j.at("seed").get<std::uint64_t>(),
      detail::vector_from_json(j.at("params")));
}

inline void save_predictor(const nn::PredictorModel& m, const std::string& config_hash,
                           const nlohmann::json& config, const std::string& path) {
  nlohmann::json j;
  j["format"] = "owcsim-predictor";
  j["version"] = 1;
  j["config_hash"] = config_hash;
  j["config"] = config;
  j["k_users"] = m.k_users();
  j["n_aps"] = m.n_aps();
  j["window"] = m.window();
  j["hidden_width"] = m.hidden_width();
  j["seed"] = m.seed();
  j["params"] = detail::vector_to_json(m.params());
  detail::write_text_file(path, j.dump(1) + "\n");
}

inline nn::PredictorModel load_predictor(const std::string& path) {
  const nlohmann::json j = detail::load_json(path, "owcsim-predictor");
  return nn::PredictorModel::restore(
      j.at("k_users").get<int>(), j.at("n_aps").get<int>(),
      j.at("window").get<int>(), j.at("hidden_width").get<int>(),
      j.at("seed").get<std::uint64_t>(),
      detail::vector_from_json(j.at("params")));
}

inline void save_train_report(const nn::TrainReport& r, const std::string& which,
                              const std::string& config_hash,
                              const std::string& path) {
  nlohmann::json j;
  j["format"] = "owcsim-train-report";
  j["version"] = 1;
  j["model"] = which;
  j["config_hash"] = config_hash;
  j["epochs"] = r.epochs;
  j["dataset_size"] = r.dataset_size;
  j["train_fraction"] = r.train_fraction;
  j["train_mse"] = r.train_mse;
  j["val_mse"] = r.val_mse;
  detail::write_text_file(path, j.dump(1) + "\n");
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Results CSV: commented header carrying the resolved config and its hash,
/// then fixed columns. Floats keep full round-trip precision.
inline std::string sweep_csv(const std::vector<sim::SweepRow>& rows,
                             const std::string& axis,
                             const config::RunConfig& cfg) {
  std::ostringstream out;
  out << "# owcsim-results v1\n";
  out << "# config_hash=" << config::config_hash_hex(cfg) << "\n";
  out << "# seed=" << cfg.seed << "\n";
  out << "# config=" << config::canonical_string(cfg) << "\n";
  out << axis << ",method,mean_sum_rate_gbps,std_sum_rate_gbps\n";
  for (const auto& r : rows) {
    out << format_double(r.value) << "," << r.method << ","
        << format_double(r.mean_sum_rate_gbps) << ","
        << format_double(r.std_sum_rate_gbps) << "\n";
  }
  return out.str();
}

inline std::string simulate_csv(const std::vector<sim::PeriodResult>& results,
                                const std::vector<double>& oracle_sums,
                                const std::vector<double>& p2_sums,
                                const std::vector<double>& distance_sums,
                                const config::RunConfig& cfg) {
  std::ostringstream out;
  out << "# owcsim-results v1\n";
  out << "# config_hash=" << config::config_hash_hex(cfg) << "\n";
  out << "# seed=" << cfg.seed << "\n";
  out << "# config=" << config::canonical_string(cfg) << "\n";
  out << "period,pipeline_sum_rate_gbps,oracle_sum_rate_gbps,p2_sum_rate_gbps,"
         "distance_sum_rate_gbps,pipeline_converged,latency_us\n";
  for (const auto& pr : results) {
    const auto t = static_cast<std::size_t>(pr.period);
    out << pr.period << "," << format_double(pr.sum_rate_bps / kGbps) << ","
        << format_double(oracle_sums[t] / kGbps) << ","
        << format_double(p2_sums[t] / kGbps) << ","
        << format_double(distance_sums[t] / kGbps) << ","
        << (pr.converged ? 1 : 0) << "," << format_double(pr.latency_us) << "\n";
  }
  return out.str();
}

/// Checks the embedded config hash of any owcsim output file. JSON outputs
/// carry a `config` object and `config_hash`; CSV outputs carry `# config=`
/// and `# config_hash=` header lines.
inline bool verify_file(const std::string& path, std::string* detail_out = nullptr) {
  const std::string body = detail::read_text_file(path);
  std::string stored_hash;
  std::string canonical;
  if (!body.empty() && body.front() == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw IoError(std::string("parse error in ") + path + ": " + e.what());
    }
    if (!j.contains("config_hash") || !j.contains("config")) {
      throw IoError("file carries no embedded config: " + path);
    }
    stored_hash = j.at("config_hash").get<std::string>();
    canonical = j.at("config").dump();
  } else {
    std::istringstream in(body);
    std::string line;
    while (std::getline(in, line)) {
      if (line.rfind("# config_hash=", 0) == 0) stored_hash = line.substr(14);
      if (line.rfind("# config=", 0) == 0) canonical = line.substr(9);
      if (!line.empty() && line.front() != '#') break;
    }
    if (stored_hash.empty() || canonical.empty()) {
      throw IoError("file carries no embedded config: " + path);
    }
  }
  const std::string recomputed = hex64(fnv1a(canonical));
  if (detail_out != nullptr) {
    *detail_out = "stored=" + stored_hash + " recomputed=" + recomputed;
  }
  return recomputed == stored_hash;
}

}  // namespace owc::io
