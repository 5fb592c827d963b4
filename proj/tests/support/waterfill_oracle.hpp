#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "owcsim/assoc.hpp"
#include "owcsim/common.hpp"

namespace owc::testsupport {

// Independent allocation oracle. For a fixed association the problem
// separates per AP; in delivered-rate coordinates z_k = e_k r_k it is
//   max sum_k log z_k   s.t.  sum z_k <= rho,  z_k in [R_min_k, min(r_k, R_max_k)]
// whose unique optimum is a clamped common water level found by bisection.
// This is a different algebraic route than the dual-subgradient allocator.

struct WaterfillResult {
  Matrix e;
  double utility = -std::numeric_limits<double>::infinity();
  bool feasible = false;
};

inline WaterfillResult waterfill_oracle(const assoc::AssignmentMatrix& x,
                                        const Matrix& rates, const Vector& rho,
                                        const Vector& r_min, const Vector& r_max) {
  const int k_users = x.num_users();
  const int n_aps = x.num_aps();
  WaterfillResult out;
  out.e = Matrix::Zero(k_users, n_aps);

  double utility = 0.0;
  for (int l = 0; l < n_aps; ++l) {
    std::vector<int> members;
    for (int k = 0; k < k_users; ++k) {
      if (x.ap_of(k) == l) members.push_back(k);
    }
    if (members.empty()) continue;

    std::vector<double> zlo, zhi;
    double sum_lo = 0.0, sum_hi = 0.0;
    for (int k : members) {
      const double r = rates(k, l);
      const double lo = r_min[k];
      const double hi = std::min(r, r_max[k]);
      if (lo > hi) return out;  // user window unattainable on this link
      zlo.push_back(lo);
      zhi.push_back(hi);
      sum_lo += lo;
      sum_hi += hi;
    }
    if (sum_lo > rho[l]) return out;  // capacity cannot cover the floors

    std::vector<double> z(members.size());
    if (sum_hi <= rho[l]) {
      z = zhi;
    } else {
      // Bisect the water level w: z_k(w) = clamp(w, zlo_k, zhi_k),
      // sum z_k(w) is nondecreasing in w.
      double lo_w = 0.0, hi_w = 0.0;
      for (double v : zhi) hi_w = std::max(hi_w, v);
      for (int it = 0; it < 200; ++it) {
        const double w = 0.5 * (lo_w + hi_w);
        double s = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
          s += std::clamp(w, zlo[i], zhi[i]);
        }
        (s > rho[l] ? hi_w : lo_w) = w;
      }
      const double w = 0.5 * (lo_w + hi_w);
      for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] = std::clamp(w, zlo[i], zhi[i]);
      }
    }
    for (std::size_t i = 0; i < members.size(); ++i) {
      const int k = members[i];
      if (z[i] <= 0.0) return out;  // zero-rate link pinned by the window
      out.e(k, l) = z[i] / rates(k, l);
      utility += std::log(z[i]);
    }
  }
  out.utility = utility;
  out.feasible = true;
  return out;
}

}  // namespace owc::testsupport
