#pragma once

#include <chrono>
#include <cmath>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "owcsim/alloc.hpp"
#include "owcsim/assoc.hpp"
#include "owcsim/bia.hpp"
#include "owcsim/config.hpp"
#include "owcsim/nn.hpp"
#include "owcsim/optics.hpp"

namespace owc::sim {

/// One drawn network history: geometry plus per-period user positions and
/// demand windows, deterministic in (config, seed).
struct Scenario {
  config::RunConfig cfg;
  std::uint64_t seed = 0;
  std::vector<optics::AccessPoint> aps;
  optics::Photodiode pd;
  std::vector<Matrix> positions;  // per period, K x 3
  std::vector<Vector> rmin_bps;   // per period
  std::vector<Vector> rmax_bps;
  int periods() const { return static_cast<int>(positions.size()); }
};

inline std::vector<optics::AccessPoint> build_ap_grid(const config::RunConfig& c) {
  const auto beam = optics::BeamParams::make(c.beam_waist_um * 1e-6,
                                             c.wavelength_nm * 1e-9);
  std::vector<optics::AccessPoint> aps;
  int id = 0;
  for (int gy = 0; gy < c.ap_grid_y; ++gy) {
    for (int gx = 0; gx < c.ap_grid_x; ++gx) {
      const double x = (gx + 0.5) * c.room_x_m / c.ap_grid_x;
      const double y = (gy + 0.5) * c.room_y_m / c.ap_grid_y;
      optics::AccessPoint ap;
      ap.id = id++;
      ap.position = Vec3(x, y, c.room_z_m);
      const double origin =
          -0.5 * c.tx_spacing_m * (c.transmitters_per_ap - 1);
      for (int i = 0; i < c.transmitters_per_ap; ++i) {
        optics::Transmitter tx;
        tx.position = ap.position + Vec3(origin + c.tx_spacing_m * i, 0.0, 0.0);
        tx.power_w = c.tx_power_w;
        tx.beam = beam;
        ap.transmitters.push_back(tx);
      }
      aps.push_back(std::move(ap));
    }
  }
  return aps;
}

/// Bounded random walk on the communication floor with wall reflection;
/// demand windows redrawn per user per period.
inline Scenario generate_scenario(const config::RunConfig& cfg, std::uint64_t seed) {
  std::vector<std::string> errors;
  config::validate(cfg, errors);
  if (!errors.empty()) throw ConfigError("generate_scenario: invalid config");

  Scenario sc;
  sc.cfg = cfg;
  sc.seed = seed;
  sc.aps = build_ap_grid(cfg);
  sc.pd = optics::Photodiode::from_area(cfg.photodiode_area_mm2 * 1e-6,
                                        cfg.responsivity_a_per_w, cfg.fov_deg);
  Rng rng(seed);
  const double floor_z = cfg.room_z_m - cfg.floor_drop_m;
  const int k = cfg.num_users;

  auto reflect = [](double v, double lo, double hi) {
    // Fold back into [lo, hi]; steps are bounded so one fold suffices.
    if (v < lo) return 2.0 * lo - v;
    if (v > hi) return 2.0 * hi - v;
    return v;
  };

  Matrix pos(k, 3);
  for (int u = 0; u < k; ++u) {
    pos(u, 0) = rng.uniform(0.0, cfg.room_x_m);
    pos(u, 1) = rng.uniform(0.0, cfg.room_y_m);
    pos(u, 2) = floor_z;
  }
  for (int t = 0; t < cfg.periods; ++t) {
    if (t > 0) {
      for (int u = 0; u < k; ++u) {
        const double step = rng.uniform(0.0, cfg.step_max_m);
        const double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
        pos(u, 0) = reflect(pos(u, 0) + step * std::cos(ang), 0.0, cfg.room_x_m);
        pos(u, 1) = reflect(pos(u, 1) + step * std::sin(ang), 0.0, cfg.room_y_m);
      }
    }
    Vector rmin(k), rmax(k);
    for (int u = 0; u < k; ++u) {
      rmin[u] = rng.uniform(cfg.rmin_low_gbps, cfg.rmin_high_gbps) * kGbps;
      rmax[u] = rmin[u] * rng.uniform(cfg.rmax_factor_low, cfg.rmax_factor_high);
    }
    sc.positions.push_back(pos);
    sc.rmin_bps.push_back(std::move(rmin));
    sc.rmax_bps.push_back(std::move(rmax));
  }
  return sc;
}

/// Per-period channel state: Lv x Lv responses and pairwise power ratios.
struct PeriodChannels {
  std::vector<std::vector<Matrix>> h;        // [user][ap]
  std::vector<Matrix> alpha;                 // [user](serving ap, interferer ap)
  std::vector<std::vector<bool>> in_view;    // [user][ap]
};

inline PeriodChannels compute_channels(const Scenario& sc, int period) {
  const int k = sc.cfg.num_users;
  const int l = sc.cfg.num_aps();
  PeriodChannels ch;
  ch.h.resize(k);
  ch.alpha.assign(k, Matrix::Zero(l, l));
  ch.in_view.assign(static_cast<std::size_t>(k), std::vector<bool>(l, false));
  for (int u = 0; u < k; ++u) {
    optics::UserState user;
    user.id = u;
    user.position = sc.positions[static_cast<std::size_t>(period)].row(u).transpose();
    user.num_photodiodes = sc.cfg.num_photodiodes;
    ch.h[u].reserve(l);
    for (int a = 0; a < l; ++a) {
      ch.h[u].push_back(optics::channel_gain(sc.aps[static_cast<std::size_t>(a)],
                                             user, sc.pd,
                                             sc.cfg.misalignment_gamma));
      ch.in_view[u][a] = ch.h[u][a].cwiseAbs().maxCoeff() > 0.0;
    }
    for (int a = 0; a < l; ++a) {
      if (!ch.in_view[u][a]) continue;
      for (int b = 0; b < l; ++b) {
        if (b == a) continue;
        ch.alpha[u](a, b) = optics::sir_alpha(sc.aps[static_cast<std::size_t>(a)],
                                              sc.aps[static_cast<std::size_t>(b)],
                                              user, sc.pd);
      }
    }
  }
  return ch;
}

namespace detail {

/// Channel matrices carry physical amperes; the covariance model is
/// noise-normalized, so scale them to unit noise floor first.
inline Matrix normalized_channel(const Matrix& h, const config::RunConfig& cfg) {
  const double sigma = std::sqrt(cfg.noise_power());
  return h / sigma;
}

inline double pair_rate(const PeriodChannels& ch, const config::RunConfig& cfg,
                        int user, int ap, int served_users,
                        const std::vector<bool>& ap_active) {
  if (!ch.in_view[static_cast<std::size_t>(user)][static_cast<std::size_t>(ap)]) {
    return 0.0;
  }
  bia::BiaConfig bc;
  bc.lv = cfg.transmitters_per_ap;
  bc.k_users = std::max(1, served_users);
  bc.p_str = cfg.p_str_normalized();
  bc.bandwidth_hz = cfg.bandwidth_hz();
  const Matrix base = bia::base_noise_covariance(bc.lv, bc.k_users);
  std::vector<bia::Interferer> ifs;
  const int l = cfg.num_aps();
  for (int b = 0; b < l; ++b) {
    if (b == ap || !ap_active[static_cast<std::size_t>(b)]) continue;
    const double a = ch.alpha[static_cast<std::size_t>(user)](ap, b);
    if (a <= 0.0) continue;
    ifs.push_back({a, normalized_channel(ch.h[static_cast<std::size_t>(user)]
                                             [static_cast<std::size_t>(b)],
                                         cfg)});
  }
  const Matrix r = bia::interference_covariance(base, bc.p_str, ifs);
  return bia::bia_rate(
      normalized_channel(
          ch.h[static_cast<std::size_t>(user)][static_cast<std::size_t>(ap)], cfg),
      bc, r);
}

}  // namespace detail

/// Planning rates fed to the association solvers: every AP treated as active
/// and serving the full user population, so entries do not depend on any
/// assignment.
inline Matrix candidate_rates(const Scenario& sc, const PeriodChannels& ch) {
  const int k = sc.cfg.num_users;
  const int l = sc.cfg.num_aps();
  Matrix r(k, l);
  const std::vector<bool> all_active(static_cast<std::size_t>(l), true);
  for (int u = 0; u < k; ++u) {
    for (int a = 0; a < l; ++a) {
      r(u, a) = detail::pair_rate(ch, sc.cfg, u, a, sc.cfg.num_users, all_active);
    }
  }
  return r;
}

/// Rates once the serving sets are fixed: each AP's transmission block is
/// shared among the users it actually serves, and only APs with at least one
/// served user transmit (and interfere).
inline Matrix service_rates(const Scenario& sc, const PeriodChannels& ch,
                            const std::vector<std::vector<int>>& served_by_ap) {
  const int k = sc.cfg.num_users;
  const int l = sc.cfg.num_aps();
  std::vector<bool> active(static_cast<std::size_t>(l), false);
  for (int a = 0; a < l; ++a) {
    active[static_cast<std::size_t>(a)] = !served_by_ap[static_cast<std::size_t>(a)].empty();
  }
  Matrix r = Matrix::Zero(k, l);
  for (int a = 0; a < l; ++a) {
    const auto& members = served_by_ap[static_cast<std::size_t>(a)];
    for (int u : members) {
      r(u, a) = detail::pair_rate(ch, sc.cfg, u, a,
                                  static_cast<int>(members.size()), active);
    }
  }
  return r;
}

inline std::vector<std::vector<int>> serving_sets_from_assignment(
    const assoc::AssignmentMatrix& x) {
  std::vector<std::vector<int>> sets(static_cast<std::size_t>(x.num_aps()));
  for (int u = 0; u < x.num_users(); ++u) {
    sets[static_cast<std::size_t>(x.ap_of(u))].push_back(u);
  }
  return sets;
}

inline std::vector<std::vector<int>> serving_sets_full_connectivity(
    const PeriodChannels& ch, int k_users, int n_aps) {
  std::vector<std::vector<int>> sets(static_cast<std::size_t>(n_aps));
  for (int a = 0; a < n_aps; ++a) {
    for (int u = 0; u < k_users; ++u) {
      if (ch.in_view[static_cast<std::size_t>(u)][static_cast<std::size_t>(a)]) {
        sets[static_cast<std::size_t>(a)].push_back(u);
      }
    }
  }
  return sets;
}

/// Achieved per-user rate: delivered rate capped at the user's demand
/// ceiling; delivery beyond R_max cannot be consumed.
inline Vector useful_rates(const Matrix& e, const Matrix& rates,
                           const Vector& rmax) {
  Vector out(e.rows());
  for (Eigen::Index u = 0; u < e.rows(); ++u) {
    const double delivered = (e.row(u).array() * rates.row(u).array()).sum();
    out[u] = std::min(delivered, rmax[u]);
  }
  return out;
}

inline alloc::AllocOptions alloc_options(const config::RunConfig& cfg) {
  alloc::AllocOptions o;
  o.step_mu = o.step_xi = o.step_lambda = cfg.allocator_step;
  o.tol = cfg.allocator_tol;
  o.tol_feas = cfg.allocator_tol_feas;
  o.max_iters = cfg.allocator_max_iters;
  return o;
}

struct MethodOutcome {
  Vector achieved_bps;
  double sum_rate_bps = 0.0;
  bool converged = true;
  Matrix resources;
};

/// Assignment-based service: Lagrangian allocation on load-adjusted rates.
inline MethodOutcome evaluate_assignment(const Scenario& sc,
                                         const PeriodChannels& ch, int period,
                                         const assoc::AssignmentMatrix& x) {
  const auto sets = serving_sets_from_assignment(x);
  const Matrix r = service_rates(sc, ch, sets);
  const int l = sc.cfg.num_aps();
  const Vector rho = Vector::Constant(l, sc.cfg.ap_capacity_gbps * kGbps);
  const auto res =
      alloc::allocate(x, r, rho, sc.rmin_bps[static_cast<std::size_t>(period)],
                      sc.rmax_bps[static_cast<std::size_t>(period)],
                      alloc_options(sc.cfg));
  MethodOutcome out;
  out.resources = res.e;
  out.achieved_bps =
      useful_rates(res.e, r, sc.rmax_bps[static_cast<std::size_t>(period)]);
  out.sum_rate_bps = out.achieved_bps.sum();
  out.converged = res.converged;
  return out;
}

/// Full-connectivity baseline: every in-view AP serves every in-view user.
inline MethodOutcome evaluate_p2(const Scenario& sc, const PeriodChannels& ch,
                                 int period) {
  const int k = sc.cfg.num_users;
  const int l = sc.cfg.num_aps();
  const auto sets = serving_sets_full_connectivity(ch, k, l);
  const Matrix r = service_rates(sc, ch, sets);
  const Vector rho = Vector::Constant(l, sc.cfg.ap_capacity_gbps * kGbps);
  const auto res =
      alloc::solve_p2(r, rho, sc.rmin_bps[static_cast<std::size_t>(period)],
                      sc.rmax_bps[static_cast<std::size_t>(period)],
                      alloc_options(sc.cfg));
  MethodOutcome out;
  out.resources = res.e;
  out.achieved_bps =
      useful_rates(res.e, r, sc.rmax_bps[static_cast<std::size_t>(period)]);
  out.sum_rate_bps = out.achieved_bps.sum();
  out.converged = res.converged;
  return out;
}

/// Distance baseline: nearest AP, uniform share, no demand awareness. The AP
/// scales down only when its aggregate delivery exceeds physical capacity;
/// delivery beyond a user's ceiling is wasted.
inline MethodOutcome evaluate_distance(const Scenario& sc,
                                       const PeriodChannels& ch, int period) {
  const int k = sc.cfg.num_users;
  const int l = sc.cfg.num_aps();
  std::vector<Vec3> users(static_cast<std::size_t>(k));
  std::vector<Vec3> aps(static_cast<std::size_t>(l));
  for (int u = 0; u < k; ++u) {
    users[static_cast<std::size_t>(u)] =
        sc.positions[static_cast<std::size_t>(period)].row(u).transpose();
  }
  for (int a = 0; a < l; ++a) {
    aps[static_cast<std::size_t>(a)] = sc.aps[static_cast<std::size_t>(a)].position;
  }
  const auto x = assoc::distance_based_assoc(users, aps, sc.cfg.fov_deg);
  const auto sets = serving_sets_from_assignment(x);
  const Matrix r = service_rates(sc, ch, sets);

  MethodOutcome out;
  out.resources = Matrix::Zero(k, l);
  Vector delivered(k);
  for (int u = 0; u < k; ++u) {
    const int a = x.ap_of(u);
    const auto load = static_cast<double>(
        sets[static_cast<std::size_t>(a)].size());
    out.resources(u, a) = 1.0 / load;
    delivered[u] = r(u, a) / load;
  }
  const double rho = sc.cfg.ap_capacity_gbps * kGbps;
  for (int a = 0; a < l; ++a) {
    double ap_load = 0.0;
    for (int u : sets[static_cast<std::size_t>(a)]) ap_load += delivered[u];
    if (ap_load > rho) {
      const double shrink = rho / ap_load;
      for (int u : sets[static_cast<std::size_t>(a)]) {
        delivered[u] *= shrink;
        out.resources(u, a) *= shrink;
      }
    }
  }
  out.achieved_bps = delivered.cwiseMin(sc.rmax_bps[static_cast<std::size_t>(period)]);
  out.sum_rate_bps = out.achieved_bps.sum();
  return out;
}

struct Snapshot {
  int period = 0;
  Matrix rates;                    // candidate K x L, bit/s
  std::vector<int> oracle_ap;      // oracle association
  Matrix resources;                // allocation under the oracle association
  Vector achieved_bps;
  double sum_rate_bps = 0.0;
  bool alloc_converged = true;
  bool capacity_violated = false;  // uniform-share load above the AP cap
  Matrix positions;                // K x 3
  Vector rmin_bps;
  Vector rmax_bps;
};

struct ScenarioRecord {
  std::uint64_t seed = 0;
  std::vector<Snapshot> snapshots;
};

struct Dataset {
  int k_users = 0;
  int n_aps = 0;
  int lv = 0;
  int periods = 0;
  std::uint64_t base_seed = 0;
  std::string config_hash;
  std::string config_canonical;
  std::vector<ScenarioRecord> scenarios;

  std::size_t snapshot_count() const {
    std::size_t n = 0;
    for (const auto& s : scenarios) n += s.snapshots.size();
    return n;
  }
};

/// Offline oracle pass over one scenario: per period, candidate rates,
/// exhaustive association, allocation, bookkeeping.
inline std::vector<Snapshot> run_offline(const Scenario& sc) {
  std::vector<Snapshot> out;
  for (int t = 0; t < sc.periods(); ++t) {
    const auto ch = compute_channels(sc, t);
    Snapshot snap;
    snap.period = t;
    snap.rates = candidate_rates(sc, ch);
    const auto oracle = assoc::brute_force_assoc(snap.rates);
    snap.oracle_ap = oracle.assignment.ap_indices();

    const auto outcome = evaluate_assignment(sc, ch, t, oracle.assignment);
    snap.resources = outcome.resources;
    snap.achieved_bps = outcome.achieved_bps;
    snap.sum_rate_bps = outcome.sum_rate_bps;
    snap.alloc_converged = outcome.converged;

    const auto load = oracle.assignment.load_per_ap();
    for (int a = 0; a < sc.cfg.num_aps(); ++a) {
      if (load[static_cast<std::size_t>(a)] == 0) continue;
      double uniform_load = 0.0;
      for (int u = 0; u < sc.cfg.num_users; ++u) {
        if (oracle.assignment.ap_of(u) == a) {
          uniform_load += snap.rates(u, a) /
                          static_cast<double>(load[static_cast<std::size_t>(a)]);
        }
      }
      if (uniform_load > sc.cfg.ap_capacity_gbps * kGbps) {
        snap.capacity_violated = true;
      }
    }
    snap.positions = sc.positions[static_cast<std::size_t>(t)];
    snap.rmin_bps = sc.rmin_bps[static_cast<std::size_t>(t)];
    snap.rmax_bps = sc.rmax_bps[static_cast<std::size_t>(t)];
    out.push_back(std::move(snap));
  }
  return out;
}

/// Offline dataset over many scenario draws; scenario i uses seed base+i.
inline Dataset generate_dataset(const config::RunConfig& cfg) {
  Dataset ds;
  ds.k_users = cfg.num_users;
  ds.n_aps = cfg.num_aps();
  ds.lv = cfg.transmitters_per_ap;
  ds.periods = cfg.periods;
  ds.base_seed = cfg.seed;
  ds.config_hash = config::config_hash_hex(cfg);
  ds.config_canonical = config::canonical_string(cfg);
  for (int s = 0; s < cfg.dataset_scenarios; ++s) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(s);
    const Scenario sc = generate_scenario(cfg, seed);
    ScenarioRecord rec;
    rec.seed = seed;
    rec.snapshots = run_offline(sc);
    ds.scenarios.push_back(std::move(rec));
  }
  return ds;
}

/// Per-user feature block: normalized candidate rates (optional), demand
/// window, position. All entries in [0, 1].
struct FeatureSpec {
  bool include_rates = true;
  double rate_scale_bps = 25.0 * kGbps;
  double demand_scale_bps = 10.0 * kGbps;

  static FeatureSpec from_config(const config::RunConfig& cfg) {
    FeatureSpec f;
    f.include_rates = cfg.include_rate_features;
    f.rate_scale_bps = cfg.feature_rate_scale_gbps * kGbps;
    f.demand_scale_bps = cfg.feature_demand_scale_gbps * kGbps;
    return f;
  }

  int block_len(int n_aps) const { return (include_rates ? n_aps : 0) + 5; }
};

inline Vector build_features(const config::RunConfig& cfg, const FeatureSpec& fs,
                             const Matrix& rates, const Matrix& positions,
                             const Vector& rmin, const Vector& rmax) {
  const int k = static_cast<int>(rates.rows());
  const int l = static_cast<int>(rates.cols());
  const int block = fs.block_len(l);
  Vector f(k * block);
  for (int u = 0; u < k; ++u) {
    int o = u * block;
    if (fs.include_rates) {
      for (int a = 0; a < l; ++a) {
        f[o++] = std::min(rates(u, a) / fs.rate_scale_bps, 1.0);
      }
    }
    f[o++] = std::min(rmin[u] / fs.demand_scale_bps, 1.0);
    f[o++] = std::min(rmax[u] / fs.demand_scale_bps, 1.0);
    f[o++] = positions(u, 0) / cfg.room_x_m;
    f[o++] = positions(u, 1) / cfg.room_y_m;
    f[o++] = positions(u, 2) / cfg.room_z_m;
  }
  return f;
}

inline Vector one_hot_assignment(const std::vector<int>& ap_of_user, int n_aps) {
  const int k = static_cast<int>(ap_of_user.size());
  Vector v = Vector::Zero(k * n_aps);
  for (int u = 0; u < k; ++u) v[u * n_aps + ap_of_user[static_cast<std::size_t>(u)]] = 1.0;
  return v;
}

/// Assignment rendered as a score matrix (one-hot rows).
inline Matrix assignment_scores(const assoc::AssignmentMatrix& x) {
  return nn::unflatten_scores(one_hot_assignment(x.ap_indices(), x.num_aps()),
                              x.num_users(), x.num_aps());
}

/// Estimator rows: one per snapshot, grouped by scenario.
inline nn::SupervisedSet estimator_set(const Dataset& ds,
                                       const config::RunConfig& cfg) {
  const FeatureSpec fs = FeatureSpec::from_config(cfg);
  const int block = fs.block_len(ds.n_aps);
  nn::SupervisedSet set;
  const auto rows = static_cast<Eigen::Index>(ds.snapshot_count());
  set.inputs = Matrix(rows, ds.k_users * block);
  set.targets = Matrix(rows, ds.k_users * ds.n_aps);
  Eigen::Index row = 0;
  int group = 0;
  for (const auto& scr : ds.scenarios) {
    for (const auto& snap : scr.snapshots) {
      set.inputs.row(row) = build_features(cfg, fs, snap.rates, snap.positions,
                                           snap.rmin_bps, snap.rmax_bps)
                                .transpose();
      set.targets.row(row) = one_hot_assignment(snap.oracle_ap, ds.n_aps).transpose();
      set.group_of_row.push_back(group);
      ++row;
    }
    ++group;
  }
  return set;
}

/// Predictor rows: sliding windows of oracle assignments within a scenario.
inline nn::SequenceSet predictor_set(const Dataset& ds, int window) {
  nn::SequenceSet set;
  int group = 0;
  for (const auto& scr : ds.scenarios) {
    const int t_count = static_cast<int>(scr.snapshots.size());
    for (int t = window; t < t_count; ++t) {
      std::vector<Vector> hist;
      hist.reserve(static_cast<std::size_t>(window));
      for (int s = t - window; s < t; ++s) {
        hist.push_back(one_hot_assignment(
            scr.snapshots[static_cast<std::size_t>(s)].oracle_ap, ds.n_aps));
      }
      set.histories.push_back(std::move(hist));
      set.targets.push_back(one_hot_assignment(
          scr.snapshots[static_cast<std::size_t>(t)].oracle_ap, ds.n_aps));
      set.group_of_row.push_back(group);
    }
    ++group;
  }
  return set;
}

/// Scenario seed offset for evaluation runs so they never reuse a training
/// draw from the same base seed.
constexpr std::uint64_t kEvalSeedOffset = 1000003;

inline nn::Hyper estimator_hyper(const config::RunConfig& cfg) {
  nn::Hyper h;
  h.epochs = cfg.estimator_epochs;
  h.learning_rate = cfg.learning_rate;
  h.momentum = cfg.momentum;
  h.batch_size = cfg.batch_size;
  h.train_fraction = cfg.train_fraction;
  h.seed = cfg.seed * 2 + 1;
  h.hidden_width = cfg.estimator_hidden_width;
  h.conv_front = cfg.conv_front;
  return h;
}

inline nn::Hyper predictor_hyper(const config::RunConfig& cfg) {
  nn::Hyper h;
  h.epochs = cfg.predictor_epochs;
  h.learning_rate = cfg.learning_rate;
  h.momentum = cfg.momentum;
  h.batch_size = cfg.batch_size;
  h.train_fraction = cfg.train_fraction;
  h.seed = cfg.seed * 2 + 2;
  h.hidden_width = cfg.predictor_hidden_width;
  h.window = cfg.window_tau;
  return h;
}

struct PeriodResult {
  int period = 0;  // the period whose resources were allocated (t+1)
  double sum_rate_bps = 0.0;
  bool converged = true;
  double latency_us = 0.0;  // feature + inference + allocation time
  std::vector<int> predicted_ap;
};

/// Online loop: estimate the current association from user requirements,
/// keep a window of estimates, predict the next period's association before
/// it starts, then allocate against the next period's channels. Multipliers
/// are settled once per period and held. The callable form exists so tests
/// can substitute either stage.
template <typename EstimateFn, typename PredictFn>
std::vector<PeriodResult> run_online_with(const Scenario& sc, int window,
                                          EstimateFn&& estimate_fn,
                                          PredictFn&& predict_fn) {
  const config::RunConfig& cfg = sc.cfg;
  const FeatureSpec fs = FeatureSpec::from_config(cfg);
  std::deque<Vector> history;
  std::vector<PeriodResult> results;

  for (int t = 0; t < sc.periods(); ++t) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto ch = compute_channels(sc, t);
    const Matrix rates = candidate_rates(sc, ch);
    const Vector features =
        build_features(cfg, fs, rates, sc.positions[static_cast<std::size_t>(t)],
                       sc.rmin_bps[static_cast<std::size_t>(t)],
                       sc.rmax_bps[static_cast<std::size_t>(t)]);
    const Matrix scores = estimate_fn(features, t);
    const auto estimated = nn::round_to_assignment(scores);
    history.push_back(one_hot_assignment(estimated.ap_indices(), cfg.num_aps()));
    if (static_cast<int>(history.size()) > window) history.pop_front();

    if (static_cast<int>(history.size()) < window || t + 1 >= sc.periods()) {
      continue;
    }

    const std::vector<Vector> hist(history.begin(), history.end());
    const Matrix next_scores = predict_fn(hist, t);
    const auto predicted = nn::round_to_assignment(next_scores);

    const auto ch_next = compute_channels(sc, t + 1);
    const auto outcome = evaluate_assignment(sc, ch_next, t + 1, predicted);
    const auto t1 = std::chrono::steady_clock::now();

    PeriodResult pr;
    pr.period = t + 1;
    pr.sum_rate_bps = outcome.sum_rate_bps;
    pr.converged = outcome.converged;
    pr.latency_us =
        std::chrono::duration<double, std::micro>(t1 - t0).count();
    pr.predicted_ap = predicted.ap_indices();
    results.push_back(std::move(pr));
  }
  return results;
}

inline std::vector<PeriodResult> run_online(const Scenario& sc,
                                            const nn::EstimatorModel& est,
                                            const nn::PredictorModel& pred) {
  const config::RunConfig& cfg = sc.cfg;
  const FeatureSpec fs = FeatureSpec::from_config(cfg);
  if (est.k_users() != cfg.num_users || est.n_aps() != cfg.num_aps() ||
      est.block_len() != fs.block_len(cfg.num_aps())) {
    throw ShapeError("run_online: estimator does not match the scenario shape");
  }
  if (pred.k_users() != cfg.num_users || pred.n_aps() != cfg.num_aps()) {
    throw ShapeError("run_online: predictor does not match the scenario shape");
  }
  return run_online_with(
      sc, pred.window(),
      [&](const Vector& features, int) { return nn::estimate(est, features); },
      [&](const std::vector<Vector>& hist, int) {
        return nn::unflatten_scores(
            pred.forward(std::span<const Vector>(hist.data(), hist.size())),
            cfg.num_users, cfg.num_aps());
      });
}

inline std::vector<double> run_baseline_p2(const Scenario& sc) {
  std::vector<double> sums;
  for (int t = 0; t < sc.periods(); ++t) {
    const auto ch = compute_channels(sc, t);
    sums.push_back(evaluate_p2(sc, ch, t).sum_rate_bps);
  }
  return sums;
}

inline std::vector<double> run_baseline_distance(const Scenario& sc) {
  std::vector<double> sums;
  for (int t = 0; t < sc.periods(); ++t) {
    const auto ch = compute_channels(sc, t);
    sums.push_back(evaluate_distance(sc, ch, t).sum_rate_bps);
  }
  return sums;
}

struct SweepRow {
  double value = 0.0;
  std::string method;
  double mean_sum_rate_gbps = 0.0;
  double std_sum_rate_gbps = 0.0;
};

struct TrainedModels {
  nn::EstimatorModel estimator;
  nn::PredictorModel predictor;
};

namespace detail {

struct Accum {
  std::vector<double> per_seed;
  void add(double v) { per_seed.push_back(v); }
  double mean() const {
    double s = 0.0;
    for (double v : per_seed) s += v;
    return per_seed.empty() ? 0.0 : s / static_cast<double>(per_seed.size());
  }
  double stddev() const {
    if (per_seed.size() < 2) return 0.0;
    const double m = mean();
    double s = 0.0;
    for (double v : per_seed) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(per_seed.size() - 1));
  }
};

/// Mean sum rate per method over the evaluation periods of one scenario.
/// Evaluation periods are those the online pipeline can serve: tau+1 .. T-1.
struct ScenarioMeans {
  double oracle = 0.0;
  double pipeline = 0.0;
  double p2 = 0.0;
  double distance = 0.0;
};

inline ScenarioMeans evaluate_scenario_methods(
    const Scenario& sc, const std::optional<TrainedModels>& models) {
  const int tau = sc.cfg.window_tau;
  ScenarioMeans m;
  int count = 0;
  std::vector<PeriodResult> online;
  if (models) online = run_online(sc, models->estimator, models->predictor);

  for (int t = tau; t < sc.periods(); ++t) {
    const auto ch = compute_channels(sc, t);
    const Matrix rates = candidate_rates(sc, ch);
    const auto oracle = assoc::brute_force_assoc(rates);
    m.oracle += evaluate_assignment(sc, ch, t, oracle.assignment).sum_rate_bps;
    m.p2 += evaluate_p2(sc, ch, t).sum_rate_bps;
    m.distance += evaluate_distance(sc, ch, t).sum_rate_bps;
    ++count;
  }
  if (models) {
    double s = 0.0;
    int n = 0;
    for (const auto& pr : online) {
      if (pr.period >= tau) {
        s += pr.sum_rate_bps;
        ++n;
      }
    }
    m.pipeline = n > 0 ? s / static_cast<double>(n) : 0.0;
  }
  if (count > 0) {
    m.oracle /= count;
    m.p2 /= count;
    m.distance /= count;
  }
  return m;
}

inline void append_rows(std::vector<SweepRow>& rows, double value,
                        const char* method, const Accum& acc) {
  rows.push_back(SweepRow{value, method, acc.mean() / kGbps, acc.stddev() / kGbps});
}

}  // namespace detail

/// One sweep point: mean and std of the per-scenario mean sum rate across
/// sweep_seeds scenario draws, per method.
inline std::vector<SweepRow> sweep_point(
    const config::RunConfig& cfg, double value, const char* /*axis*/,
    const std::optional<TrainedModels>& models) {
  detail::Accum oracle, pipeline, p2, distance;
  for (int s = 0; s < cfg.sweep_seeds; ++s) {
    const Scenario sc = generate_scenario(cfg, cfg.seed + static_cast<std::uint64_t>(s));
    const auto means = detail::evaluate_scenario_methods(sc, models);
    oracle.add(means.oracle);
    if (models) pipeline.add(means.pipeline);
    p2.add(means.p2);
    distance.add(means.distance);
  }
  std::vector<SweepRow> rows;
  detail::append_rows(rows, value, "oracle", oracle);
  if (models) detail::append_rows(rows, value, "pipeline", pipeline);
  detail::append_rows(rows, value, "p2", p2);
  detail::append_rows(rows, value, "distance", distance);
  return rows;
}

inline std::vector<SweepRow> sweep_beam_waist(
    const config::RunConfig& cfg, const std::vector<double>& w0_um_list,
    const std::optional<TrainedModels>& models) {
  if (w0_um_list.empty()) throw ConfigError("sweep_beam_waist: empty list");
  std::vector<SweepRow> rows;
  for (double w0 : w0_um_list) {
    config::RunConfig c = cfg;
    c.beam_waist_um = w0;
    for (auto& r : sweep_point(c, w0, "beam_waist_um", models)) {
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

inline std::vector<SweepRow> sweep_snr(
    const config::RunConfig& cfg, const std::vector<double>& snr_db_list,
    const std::optional<TrainedModels>& models) {
  if (snr_db_list.empty()) throw ConfigError("sweep_snr: empty list");
  std::vector<SweepRow> rows;
  for (double snr : snr_db_list) {
    config::RunConfig c = cfg;
    c.snr_offset_db = snr;
    for (auto& r : sweep_point(c, snr, "snr_db", models)) {
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

}  // namespace owc::sim
