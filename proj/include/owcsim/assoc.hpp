#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "owcsim/common.hpp"

namespace owc::assoc {

constexpr double kInfeasibleUtility = -std::numeric_limits<double>::infinity();
constexpr std::uint64_t kBruteForceGuard = 10'000'000;

/// One-AP-per-user association for a time period. Stored as the per-user AP
/// index; rows of the equivalent K x L binary matrix sum to exactly 1.
class AssignmentMatrix {
 public:
  AssignmentMatrix() = default;
  AssignmentMatrix(std::vector<int> ap_of_user, int num_aps)
      : ap_of_user_(std::move(ap_of_user)), num_aps_(num_aps) {
    for (int a : ap_of_user_) {
      if (a < 0 || a >= num_aps_) {
        throw ShapeError("AssignmentMatrix: AP index out of range");
      }
    }
  }

  int num_users() const { return static_cast<int>(ap_of_user_.size()); }
  int num_aps() const { return num_aps_; }
  int ap_of(int user) const { return ap_of_user_[static_cast<std::size_t>(user)]; }
  const std::vector<int>& ap_indices() const { return ap_of_user_; }

  /// Users per AP (column sums of the binary matrix).
  std::vector<int> load_per_ap() const {
    std::vector<int> load(static_cast<std::size_t>(num_aps_), 0);
    for (int a : ap_of_user_) ++load[static_cast<std::size_t>(a)];
    return load;
  }

  Eigen::MatrixXi to_matrix() const {
    Eigen::MatrixXi x = Eigen::MatrixXi::Zero(num_users(), num_aps_);
    for (int k = 0; k < num_users(); ++k) x(k, ap_of(k)) = 1;
    return x;
  }

  bool operator==(const AssignmentMatrix& other) const {
    return num_aps_ == other.num_aps_ && ap_of_user_ == other.ap_of_user_;
  }

 private:
  std::vector<int> ap_of_user_;
  int num_aps_ = 0;
};

/// Log utility of an assignment under uniform resource allocation
/// e = 1/K_l: sum_k log(r[k, l(k)] / K_{l(k)}), in nats. Any user pinned to
/// a zero-rate link makes the assignment infeasible (-inf), not an error.
inline double utility_p3(const AssignmentMatrix& x, const Matrix& rates) {
  if (rates.rows() != x.num_users() || rates.cols() != x.num_aps()) {
    throw ShapeError("utility_p3: rate matrix shape mismatch");
  }
  const std::vector<int> load = x.load_per_ap();
  double u = 0.0;
  for (int k = 0; k < x.num_users(); ++k) {
    const int l = x.ap_of(k);
    const double r = rates(k, l);
    if (r <= 0.0) return kInfeasibleUtility;
    u += std::log(r / static_cast<double>(load[static_cast<std::size_t>(l)]));
  }
  return u;
}

struct AssocResult {
  AssignmentMatrix assignment;
  double utility = kInfeasibleUtility;
};

/// Exhaustive search over all L^K assignments. Tie-break: the
/// lexicographically smallest assignment vector among optima (users scanned
/// in index order, APs in index order). Guarded at L^K <= 1e7.
inline AssocResult brute_force_assoc(const Matrix& rates) {
  const int k_users = static_cast<int>(rates.rows());
  const int n_aps = static_cast<int>(rates.cols());
  if (k_users < 1 || n_aps < 1) {
    throw ShapeError("brute_force_assoc: empty rate matrix");
  }
  std::uint64_t space = 1;
  for (int k = 0; k < k_users; ++k) {
    if (space > kBruteForceGuard / static_cast<std::uint64_t>(n_aps)) {
      throw SizeError("brute_force_assoc: L^K exceeds enumeration guard");
    }
    space *= static_cast<std::uint64_t>(n_aps);
  }

  std::vector<int> current(static_cast<std::size_t>(k_users), 0);
  std::vector<int> best = current;
  double best_u = kInfeasibleUtility;
  for (std::uint64_t n = 0; n < space; ++n) {
    // Decode n in base L, most significant digit = user 0, so numeric order
    // is lexicographic order and strict improvement keeps the first optimum.
    std::uint64_t rem = n;
    for (int k = k_users - 1; k >= 0; --k) {
      current[static_cast<std::size_t>(k)] =
          static_cast<int>(rem % static_cast<std::uint64_t>(n_aps));
      rem /= static_cast<std::uint64_t>(n_aps);
    }
    const double u = utility_p3(AssignmentMatrix(current, n_aps), rates);
    if (u > best_u) {
      best_u = u;
      best = current;
    }
  }
  return AssocResult{AssignmentMatrix(best, n_aps), best_u};
}

/// Nearest-AP association among covering APs; ties to the lowest AP index.
/// A user covered by no AP is an error.
inline AssignmentMatrix distance_based_assoc(
    std::span<const Vec3> user_positions, std::span<const Vec3> ap_positions,
    double fov_deg) {
  const double cos_fov = std::cos(fov_deg * std::numbers::pi / 180.0);
  std::vector<int> ap_of_user;
  ap_of_user.reserve(user_positions.size());
  for (std::size_t k = 0; k < user_positions.size(); ++k) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < ap_positions.size(); ++l) {
      const Vec3 to_ap = ap_positions[l] - user_positions[k];
      const double d = to_ap.norm();
      if (d > 0.0 && to_ap.z() / d < cos_fov) continue;
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(l);
      }
    }
    if (best < 0) {
      throw std::runtime_error("distance_based_assoc: user covered by no AP");
    }
    ap_of_user.push_back(best);
  }
  return AssignmentMatrix(std::move(ap_of_user),
                          static_cast<int>(ap_positions.size()));
}

/// Full-connectivity indicator: every user draws from every AP. Deliberately
/// not an AssignmentMatrix; it violates the one-AP-per-user invariant.
inline Eigen::MatrixXi full_connectivity_assignment(int k_users, int n_aps) {
  return Eigen::MatrixXi::Ones(k_users, n_aps);
}

}  // namespace owc::assoc
