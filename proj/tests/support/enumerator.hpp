#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "owcsim/common.hpp"

namespace owc::testsupport {

// Independent exhaustive association enumerator, written directly against
// the problem statement: recursive construction, utility recomputed inline,
// lexicographic-first tie-break.
struct EnumeratorResult {
  std::vector<int> assignment;
  double utility = -std::numeric_limits<double>::infinity();
};

inline void enumerate_rec(const Matrix& rates, std::vector<int>& partial,
                          int user, EnumeratorResult& best) {
  const int k = static_cast<int>(rates.rows());
  const int l = static_cast<int>(rates.cols());
  if (user == k) {
    std::vector<int> load(static_cast<std::size_t>(l), 0);
    for (int a : partial) ++load[static_cast<std::size_t>(a)];
    double u = 0.0;
    for (int i = 0; i < k; ++i) {
      const int a = partial[static_cast<std::size_t>(i)];
      const double r = rates(i, a);
      if (r <= 0.0) {
        u = -std::numeric_limits<double>::infinity();
        break;
      }
      u += std::log(r) - std::log(static_cast<double>(load[static_cast<std::size_t>(a)]));
    }
    if (u > best.utility) {
      best.utility = u;
      best.assignment = partial;
    }
    return;
  }
  for (int a = 0; a < l; ++a) {
    partial.push_back(a);
    enumerate_rec(rates, partial, user + 1, best);
    partial.pop_back();
  }
}

inline EnumeratorResult independent_enumerator(const Matrix& rates) {
  EnumeratorResult best;
  // All-infeasible instances tie at -inf; the lexicographically first
  // assignment (all zeros) is the agreed answer.
  best.assignment.assign(static_cast<std::size_t>(rates.rows()), 0);
  std::vector<int> partial;
  enumerate_rec(rates, partial, 0, best);
  return best;
}

}  // namespace owc::testsupport
