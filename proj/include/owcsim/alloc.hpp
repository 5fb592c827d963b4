#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "owcsim/assoc.hpp"
#include "owcsim/common.hpp"

namespace owc::alloc {

struct AllocOptions {
  double step_mu = 1e-2;
  double step_xi = 1e-2;
  double step_lambda = 1e-2;
  double tol = 1e-6;           // sup-norm multiplier change
  double tol_feas = 1e-3;      // relative slack on constraints
  int max_iters = 200000;
  double rate_scale_bps = kGbps;  // rates normalized inside the dual loop
};

namespace detail {

// Effective per-constraint step: the base step divided by the local
// sensitivity of the delivered rate to the price, so every multiplier
// contracts its residual at roughly the same rate. A plain Omega/sqrt(i)
// schedule stalls on window-binding instances: by the time the step has
// decayed, sub-percent residuals move by less than the tolerance per
// iteration and the budget runs out.
constexpr double kSensitivityFloor = 0.05;

inline double scaled_step(double base, double sensitivity) {
  return base / std::max(sensitivity, kSensitivityFloor);
}

// d(delivered)/d(price) for one pair in normalized units; zero when the
// resource is clamped at the box edge.
inline double pair_sensitivity(double rn, double price) {
  if (rn <= 0.0 || price <= 0.0) return 0.0;
  const double z = 1.0 / price;
  if (z >= rn) return 0.0;
  return z * z;
}

}  // namespace detail

/// Dual variables of the allocation problem. Multipliers stay on the
/// positive orthant by projection. mu prices AP capacity; xi_max and
/// lambda_min price the per-user rate window.
struct LagrangeState {
  Vector mu;
  Vector xi_max;
  Vector lambda_min;
  double step_mu = 0.0;
  double step_xi = 0.0;
  double step_lambda = 0.0;
  int iteration = 0;
};

struct AllocDiagnostics {
  int iterations = 0;
  double final_multiplier_change = 0.0;
  double max_capacity_violation = 0.0;  // relative
  double max_window_violation = 0.0;    // relative
  bool feasible = false;
};

struct AllocResult {
  Matrix e;  // K x L, zero wherever the user is not assigned
  LagrangeState state;
  bool converged = false;
  AllocDiagnostics diag;
};

/// Closed-form stationary point of the per-pair Lagrangian term
/// log(e r) - (mu + xi - lambda) e r in the normalized rate r/scale:
/// e* = 1 / (r_norm (mu + xi - lambda)), clamped to [0, 1]. A nonpositive
/// price means the derivative stays positive up to the box edge, so e* = 1.
inline double stationary_resource(double rate_bps, double mu, double xi,
                                  double lambda,
                                  double rate_scale_bps = kGbps) {
  if (rate_bps <= 0.0) return 0.0;
  const double price = mu + xi - lambda;
  if (price <= 0.0) return 1.0;
  const double rn = rate_bps / rate_scale_bps;
  return std::clamp(1.0 / (rn * price), 0.0, 1.0);
}

/// mu <- [mu - step (rho - load)]^+ : grows when the AP is overloaded.
inline double update_mu(double mu, double step, double ap_load, double rho) {
  return std::max(0.0, mu - step * (rho - ap_load));
}

/// xi <- [xi - step (R_max - R)]^+ : grows when the user exceeds its cap.
inline double update_xi(double xi, double step, double user_rate, double r_max) {
  return std::max(0.0, xi - step * (r_max - user_rate));
}

/// lambda <- [lambda - step (R - R_min)]^+ : grows when the user is starved.
inline double update_lambda(double lambda, double step, double user_rate,
                            double r_min) {
  return std::max(0.0, lambda - step * (user_rate - r_min));
}

namespace detail {

inline double relative_excess(double value, double bound) {
  if (value <= bound) return 0.0;
  const double denom = std::max(std::abs(bound), 1e-12);
  return (value - bound) / denom;
}

}  // namespace detail

/// Dual-decomposition allocator for a fixed association. Iterates the
/// closed-form per-pair resource with gradient-projection multiplier updates
/// until the multipliers settle. Feasibility is judged at tol_feas relative
/// slack; infeasible instances exhaust max_iters and come back with
/// converged=false and best-effort resources.
inline AllocResult allocate(const assoc::AssignmentMatrix& x, const Matrix& rates,
                            const Vector& rho, const Vector& r_min,
                            const Vector& r_max, const AllocOptions& opts = {}) {
  const int k_users = x.num_users();
  const int n_aps = x.num_aps();
  if (rates.rows() != k_users || rates.cols() != n_aps) {
    throw ShapeError("allocate: rate matrix shape mismatch");
  }
  if (rho.size() != n_aps || r_min.size() != k_users || r_max.size() != k_users) {
    throw ShapeError("allocate: constraint vector shape mismatch");
  }

  const double scale = opts.rate_scale_bps;
  Vector rn(k_users);  // normalized rate of each user's assigned link
  for (int k = 0; k < k_users; ++k) rn[k] = rates(k, x.ap_of(k)) / scale;
  const Vector rhon = rho / scale;
  const Vector rminn = r_min / scale;
  const Vector rmaxn = r_max / scale;

  LagrangeState st;
  st.mu = Vector::Zero(n_aps);
  st.xi_max = Vector::Zero(k_users);
  st.lambda_min = Vector::Zero(k_users);

  Vector e = Vector::Zero(k_users);
  Vector loads(n_aps);
  Vector delivered(k_users);
  double change = std::numeric_limits<double>::infinity();
  double cap_viol = 0.0;
  double win_viol = 0.0;
  int iter = 0;
  bool settled = false;

  auto primal_step = [&]() {
    loads.setZero();
    for (int k = 0; k < k_users; ++k) {
      const int l = x.ap_of(k);
      e[k] = stationary_resource(rn[k] * scale, st.mu[l], st.xi_max[k],
                                 st.lambda_min[k], scale);
      delivered[k] = e[k] * rn[k];
      loads[l] += delivered[k];
    }
    cap_viol = 0.0;
    win_viol = 0.0;
    for (int l = 0; l < n_aps; ++l) {
      cap_viol = std::max(cap_viol, detail::relative_excess(loads[l], rhon[l]));
    }
    for (int k = 0; k < k_users; ++k) {
      win_viol = std::max({win_viol, detail::relative_excess(delivered[k], rmaxn[k]),
                           detail::relative_excess(rminn[k], delivered[k])});
    }
  };

  // Break needs a feasibility margin below tol_feas: the reported utility
  // may only be inflated by violations well under the comparison tolerance.
  const double break_feas = std::min(opts.tol_feas, 2.5e-4);
  for (iter = 1; iter <= opts.max_iters; ++iter) {
    primal_step();
    // Done when the multipliers stopped moving and the primal they induce
    // honors the constraints; small multiplier motion alone can mask a
    // residual violation.
    if (change < opts.tol && cap_viol <= break_feas && win_viol <= break_feas) {
      settled = true;
      break;
    }
    change = 0.0;
    Vector ap_sens = Vector::Zero(n_aps);
    for (int k = 0; k < k_users; ++k) {
      const int l = x.ap_of(k);
      const double price = st.mu[l] + st.xi_max[k] - st.lambda_min[k];
      ap_sens[l] += detail::pair_sensitivity(rn[k], price);
    }
    for (int l = 0; l < n_aps; ++l) {
      st.step_mu = detail::scaled_step(opts.step_mu, ap_sens[l]);
      const double next = update_mu(st.mu[l], st.step_mu, loads[l], rhon[l]);
      change = std::max(change, std::abs(next - st.mu[l]));
      st.mu[l] = next;
    }
    for (int k = 0; k < k_users; ++k) {
      const int l = x.ap_of(k);
      const double price = st.mu[l] + st.xi_max[k] - st.lambda_min[k];
      const double sens = detail::pair_sensitivity(rn[k], price);
      st.step_xi = detail::scaled_step(opts.step_xi, sens);
      st.step_lambda = detail::scaled_step(opts.step_lambda, sens);
      const double nxi =
          update_xi(st.xi_max[k], st.step_xi, delivered[k], rmaxn[k]);
      const double nla =
          update_lambda(st.lambda_min[k], st.step_lambda, delivered[k], rminn[k]);
      change = std::max({change, std::abs(nxi - st.xi_max[k]),
                         std::abs(nla - st.lambda_min[k])});
      st.xi_max[k] = nxi;
      st.lambda_min[k] = nla;
    }
  }
  st.iteration = std::min(iter, opts.max_iters);
  if (!settled) primal_step();  // best-effort resources at final multipliers

  AllocDiagnostics diag;
  diag.iterations = st.iteration;
  diag.final_multiplier_change = std::isfinite(change) ? change : 0.0;
  diag.max_capacity_violation = cap_viol;
  diag.max_window_violation = win_viol;
  diag.feasible = cap_viol <= opts.tol_feas && win_viol <= opts.tol_feas;

  AllocResult out;
  out.e = Matrix::Zero(k_users, n_aps);
  for (int k = 0; k < k_users; ++k) out.e(k, x.ap_of(k)) = e[k];
  out.state = st;
  out.converged = settled && diag.feasible;
  out.diag = diag;
  return out;
}

/// Proportional-fairness objective of an allocation: sum_k log of the
/// user's aggregate delivered rate (nats; -inf if a user gets nothing).
inline double log_utility(const Matrix& e, const Matrix& rates) {
  if (e.rows() != rates.rows() || e.cols() != rates.cols()) {
    throw ShapeError("log_utility: shape mismatch");
  }
  double u = 0.0;
  for (Eigen::Index k = 0; k < e.rows(); ++k) {
    const double total = (e.row(k).array() * rates.row(k).array()).sum();
    if (total <= 0.0) return assoc::kInfeasibleUtility;
    u += std::log(total);
  }
  return u;
}

struct P2Result {
  Matrix e;  // K x L over all pairs
  double utility = 0.0;
  bool converged = false;
  AllocDiagnostics diag;
};

/// Full-connectivity allocation (x == 1): every user draws resources from
/// every AP with a positive-rate link. The rate window is priced per pair,
/// matching the relaxed problem's constraint set; zero-rate pairs get no
/// resources. Utility is the log of each user's aggregate delivered rate.
inline P2Result solve_p2(const Matrix& rates, const Vector& rho,
                         const Vector& r_min, const Vector& r_max,
                         const AllocOptions& opts = {}) {
  const int k_users = static_cast<int>(rates.rows());
  const int n_aps = static_cast<int>(rates.cols());
  if (rho.size() != n_aps || r_min.size() != k_users || r_max.size() != k_users) {
    throw ShapeError("solve_p2: constraint vector shape mismatch");
  }

  const double scale = opts.rate_scale_bps;
  const Matrix rn = rates / scale;
  const Vector rhon = rho / scale;
  const Vector rminn = r_min / scale;
  const Vector rmaxn = r_max / scale;

  Vector mu = Vector::Zero(n_aps);
  Matrix xi = Matrix::Zero(k_users, n_aps);
  Matrix lambda = Matrix::Zero(k_users, n_aps);
  Matrix e = Matrix::Zero(k_users, n_aps);
  Matrix pair_rate = Matrix::Zero(k_users, n_aps);
  Vector loads(n_aps);
  double cap_viol = 0.0;
  double win_viol = 0.0;

  auto primal_step = [&]() {
    loads.setZero();
    for (int k = 0; k < k_users; ++k) {
      for (int l = 0; l < n_aps; ++l) {
        if (rn(k, l) <= 0.0) {
          e(k, l) = 0.0;
          pair_rate(k, l) = 0.0;
          continue;
        }
        e(k, l) = stationary_resource(rn(k, l) * scale, mu[l], xi(k, l),
                                      lambda(k, l), scale);
        pair_rate(k, l) = e(k, l) * rn(k, l);
        loads[l] += pair_rate(k, l);
      }
    }
    cap_viol = 0.0;
    win_viol = 0.0;
    for (int l = 0; l < n_aps; ++l) {
      cap_viol = std::max(cap_viol, detail::relative_excess(loads[l], rhon[l]));
    }
    for (int k = 0; k < k_users; ++k) {
      for (int l = 0; l < n_aps; ++l) {
        if (rn(k, l) <= 0.0) continue;
        win_viol = std::max({win_viol,
                             detail::relative_excess(pair_rate(k, l), rmaxn[k]),
                             detail::relative_excess(rminn[k], pair_rate(k, l))});
      }
    }
  };

  double change = std::numeric_limits<double>::infinity();
  int iter = 0;
  bool settled = false;
  const double break_feas = std::min(opts.tol_feas, 2.5e-4);
  for (iter = 1; iter <= opts.max_iters; ++iter) {
    primal_step();
    if (change < opts.tol && cap_viol <= break_feas && win_viol <= break_feas) {
      settled = true;
      break;
    }
    change = 0.0;
    Vector ap_sens = Vector::Zero(n_aps);
    Matrix pair_sens = Matrix::Zero(k_users, n_aps);
    for (int k = 0; k < k_users; ++k) {
      for (int l = 0; l < n_aps; ++l) {
        const double price = mu[l] + xi(k, l) - lambda(k, l);
        pair_sens(k, l) = detail::pair_sensitivity(rn(k, l), price);
        ap_sens[l] += pair_sens(k, l);
      }
    }
    for (int l = 0; l < n_aps; ++l) {
      const double step = detail::scaled_step(opts.step_mu, ap_sens[l]);
      const double next = update_mu(mu[l], step, loads[l], rhon[l]);
      change = std::max(change, std::abs(next - mu[l]));
      mu[l] = next;
    }
    for (int k = 0; k < k_users; ++k) {
      for (int l = 0; l < n_aps; ++l) {
        if (rn(k, l) <= 0.0) continue;
        const double sxi = detail::scaled_step(opts.step_xi, pair_sens(k, l));
        const double sla = detail::scaled_step(opts.step_lambda, pair_sens(k, l));
        const double nxi = update_xi(xi(k, l), sxi, pair_rate(k, l), rmaxn[k]);
        const double nla =
            update_lambda(lambda(k, l), sla, pair_rate(k, l), rminn[k]);
        change = std::max({change, std::abs(nxi - xi(k, l)),
                           std::abs(nla - lambda(k, l))});
        xi(k, l) = nxi;
        lambda(k, l) = nla;
      }
    }
  }
  if (!settled) primal_step();

  AllocDiagnostics diag;
  diag.iterations = std::min(iter, opts.max_iters);
  diag.final_multiplier_change = std::isfinite(change) ? change : 0.0;
  diag.max_capacity_violation = cap_viol;
  diag.max_window_violation = win_viol;
  diag.feasible = cap_viol <= opts.tol_feas && win_viol <= opts.tol_feas;

  P2Result out;
  out.e = e;
  double utility = 0.0;
  for (int k = 0; k < k_users; ++k) {
    double total = 0.0;
    for (int l = 0; l < n_aps; ++l) total += e(k, l) * rates(k, l);
    utility += total > 0.0 ? std::log(total) : assoc::kInfeasibleUtility;
  }
  out.utility = utility;
  out.converged = settled && diag.feasible;
  out.diag = diag;
  return out;
}

}  // namespace owc::alloc
