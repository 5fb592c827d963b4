#include "owcsim/assoc.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "support/enumerator.hpp"

namespace owc {
namespace {

Matrix random_rates(Rng& rng, int k, int l, double lo = 0.2, double hi = 9.0) {
  Matrix r(k, l);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < l; ++j) r(i, j) = rng.uniform(lo, hi);
  }
  return r;
}

TEST(UtilityP3, SingleUserSingleAp) {
  Matrix r(1, 1);
  r << 2.0;
  const assoc::AssignmentMatrix x({0}, 1);
  EXPECT_DOUBLE_EQ(assoc::utility_p3(x, r), std::log(2.0));
}

TEST(UtilityP3, SharedApHalvesTheShare) {
  Matrix r(2, 1);
  r << 2.0, 2.0;
  const assoc::AssignmentMatrix x({0, 0}, 1);
  EXPECT_DOUBLE_EQ(assoc::utility_p3(x, r), 0.0);
}

TEST(UtilityP3, MatchesIndependentRecomputation) {
  Rng rng(41);
  const Matrix r = random_rates(rng, 3, 2);
  const assoc::AssignmentMatrix x({1, 0, 1}, 2);
  const double want = std::log(r(0, 1) / 2.0) + std::log(r(1, 0) / 1.0) +
                      std::log(r(2, 1) / 2.0);
  EXPECT_NEAR(assoc::utility_p3(x, r), want, 1e-12);
}

TEST(UtilityP3, ZeroRateLinkIsInfeasible) {
  Matrix r(2, 2);
  r << 1.0, 0.0, 1.0, 1.0;
  const assoc::AssignmentMatrix x({1, 0}, 2);
  EXPECT_EQ(assoc::utility_p3(x, r), assoc::kInfeasibleUtility);
}

TEST(BruteForce, SingleUserPicksArgmax) {
  Matrix r(1, 2);
  r << 1.0, 2.0;
  const auto res = assoc::brute_force_assoc(r);
  EXPECT_EQ(res.assignment.ap_of(0), 1);
  EXPECT_DOUBLE_EQ(res.utility, std::log(2.0));
}

TEST(BruteForce, IdenticalColumnsUseLexicographicTieBreak) {
  Matrix r(2, 2);
  r << 3.0, 3.0, 5.0, 5.0;
  const auto res = assoc::brute_force_assoc(r);
  // Both balanced assignments are optimal; (0,1) precedes (1,0).
  EXPECT_EQ(res.assignment.ap_of(0), 0);
  EXPECT_EQ(res.assignment.ap_of(1), 1);
}

TEST(BruteForce, MatchesIndependentEnumerator) {
  Rng rng(43);
  for (int trial = 0; trial < 60; ++trial) {
    const int k = 1 + static_cast<int>(rng.uniform_int(3));
    const int l = 1 + static_cast<int>(rng.uniform_int(2));
    const Matrix r = random_rates(rng, k, l);
    const auto got = assoc::brute_force_assoc(r);
    const auto want = testsupport::independent_enumerator(r);
    EXPECT_EQ(got.assignment.ap_indices(), want.assignment);
    EXPECT_NEAR(got.utility, want.utility, 1e-9);
  }
}

TEST(BruteForce, OptimalOverFullEnumeration) {
  Rng rng(47);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_int(3));  // 2..4
    const int l = 2 + static_cast<int>(rng.uniform_int(2));  // 2..3
    const Matrix r = random_rates(rng, k, l);
    const auto res = assoc::brute_force_assoc(r);
    std::vector<int> a(static_cast<std::size_t>(k), 0);
    while (true) {
      EXPECT_GE(res.utility,
                assoc::utility_p3(assoc::AssignmentMatrix(a, l), r) - 1e-12);
      int i = k - 1;
      while (i >= 0 && a[static_cast<std::size_t>(i)] == l - 1) {
        a[static_cast<std::size_t>(i)] = 0;
        --i;
      }
      if (i < 0) break;
      ++a[static_cast<std::size_t>(i)];
    }
  }
}

TEST(BruteForce, RateScalingKeepsArgmax) {
  Rng rng(53);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix r = random_rates(rng, 3, 3);
    const double c = rng.uniform(0.1, 50.0);
    const auto base = assoc::brute_force_assoc(r);
    const auto scaled = assoc::brute_force_assoc(c * r);
    EXPECT_EQ(base.assignment.ap_indices(), scaled.assignment.ap_indices());
  }
}

TEST(BruteForce, UserPermutationEquivariance) {
  Rng rng(59);
  const Matrix r = random_rates(rng, 4, 3);
  const std::vector<int> perm{2, 0, 3, 1};
  Matrix rp(4, 3);
  for (int k = 0; k < 4; ++k) rp.row(k) = r.row(perm[static_cast<std::size_t>(k)]);
  const auto base = assoc::brute_force_assoc(r);
  const auto permuted = assoc::brute_force_assoc(rp);
  // The permuted instance admits the permuted optimum; utilities must agree.
  EXPECT_NEAR(base.utility, permuted.utility, 1e-9);
  const double u_perm_of_base = assoc::utility_p3(
      assoc::AssignmentMatrix(
          {base.assignment.ap_of(perm[0]), base.assignment.ap_of(perm[1]),
           base.assignment.ap_of(perm[2]), base.assignment.ap_of(perm[3])},
          3),
      rp);
  EXPECT_NEAR(u_perm_of_base, permuted.utility, 1e-9);
}

TEST(BruteForce, GuardRejectsHugeSearchSpaces) {
  const Matrix r = Matrix::Ones(9, 10);  // 10^9 assignments
  EXPECT_THROW(assoc::brute_force_assoc(r), SizeError);
}

TEST(DistanceAssoc, PicksApDirectlyOverhead) {
  std::vector<Vec3> aps{{1, 1, 3}, {4, 1, 3}, {1, 4, 3}, {4, 4, 3}};
  std::vector<Vec3> users{{1.05, 3.9, 1.0}};
  const auto x = assoc::distance_based_assoc(users, aps, 45.0);
  EXPECT_EQ(x.ap_of(0), 2);
}

TEST(DistanceAssoc, EquidistantTieGoesToLowestIndex) {
  std::vector<Vec3> aps{{1, 1, 3}, {3, 1, 3}};
  std::vector<Vec3> users{{2, 1, 1}};
  const auto x = assoc::distance_based_assoc(users, aps, 45.0);
  EXPECT_EQ(x.ap_of(0), 0);
}

TEST(DistanceAssoc, MatchesIndependentNearestNeighbor) {
  Rng rng(61);
  std::vector<Vec3> aps{{1.25, 1.25, 3}, {1.25, 3.75, 3}, {3.75, 1.25, 3},
                        {3.75, 3.75, 3}};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Vec3> users{{rng.uniform(0.0, 5.0), rng.uniform(0.0, 5.0), 1.0}};
    const auto x = assoc::distance_based_assoc(users, aps, 45.0);
    int best = -1;
    double best_d = 1e300;
    for (std::size_t l = 0; l < aps.size(); ++l) {
      const double d = (aps[l] - users[0]).norm();
      const Vec3 v = aps[l] - users[0];
      const double cos_ang = v.z() / d;
      if (cos_ang < std::cos(45.0 * std::numbers::pi / 180.0)) continue;
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(l);
      }
    }
    ASSERT_GE(best, 0);
    EXPECT_EQ(x.ap_of(0), best);
  }
}

TEST(DistanceAssoc, UncoveredUserIsAnError) {
  std::vector<Vec3> aps{{0, 0, 3}};
  std::vector<Vec3> users{{4.5, 4.5, 1.0}};
  EXPECT_THROW(assoc::distance_based_assoc(users, aps, 45.0), std::runtime_error);
}

TEST(FullConnectivity, AllOnesOfRequestedShape) {
  EXPECT_EQ(assoc::full_connectivity_assignment(2, 2),
            Eigen::MatrixXi::Ones(2, 2));
  EXPECT_EQ(assoc::full_connectivity_assignment(1, 1),
            Eigen::MatrixXi::Ones(1, 1));
  EXPECT_EQ(assoc::full_connectivity_assignment(3, 8),
            Eigen::MatrixXi::Ones(3, 8));
}

TEST(AssignmentMatrix, RowInvariantHolds) {
  const assoc::AssignmentMatrix x({2, 0, 1}, 3);
  const Eigen::MatrixXi m = x.to_matrix();
  for (int k = 0; k < 3; ++k) EXPECT_EQ(m.row(k).sum(), 1);
  EXPECT_THROW(assoc::AssignmentMatrix({3}, 3), ShapeError);
}

}  // namespace
}  // namespace owc
