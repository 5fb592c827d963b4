#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>

#include "owcsim/common.hpp"

namespace owc::bia {

/// Exact rational fraction of the transmission block owned by one user.
struct AlignmentRatio {
  std::uint64_t num = 0;
  std::uint64_t den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

namespace detail {

inline std::uint64_t checked_pow(std::uint64_t base, int exp) {
  std::uint64_t r = 1;
  for (int i = 0; i < exp; ++i) {
    if (base != 0 && r > UINT64_MAX / base) {
      throw std::overflow_error("block_length: count overflows 64 bits");
    }
    r *= base;
  }
  return r;
}

inline void check_dims(int lv, int k) {
  if (lv < 2) throw std::domain_error("bia: lv must be >= 2");
  if (k < 1) throw std::domain_error("bia: k must be >= 1");
}

}  // namespace detail

/// Share of alignment blocks per user: (Lv-1)^(K-1) of them out of a block
/// of (Lv-1)^K + K (Lv-1)^(K-1) slots, which reduces to 1/(K + Lv - 1).
inline AlignmentRatio alignment_ratio(int lv, int k) {
  detail::check_dims(lv, k);
  return AlignmentRatio{1, static_cast<std::uint64_t>(k + lv - 1)};
}

/// Length of the full transmission block in time slots.
inline std::uint64_t block_length(int lv, int k) {
  detail::check_dims(lv, k);
  const auto base = static_cast<std::uint64_t>(lv - 1);
  const std::uint64_t a = detail::checked_pow(base, k);
  const std::uint64_t b = detail::checked_pow(base, k - 1);
  const auto kk = static_cast<std::uint64_t>(k);
  if (b != 0 && kk > (UINT64_MAX - a) / b) {
    throw std::overflow_error("block_length: count overflows 64 bits");
  }
  return a + kk * b;
}

/// Covariance of the noise left after interference subtraction:
/// block-diagonal with K on the first Lv-1 diagonal entries and 1 last.
inline Matrix base_noise_covariance(int lv, int k) {
  detail::check_dims(lv, k);
  Matrix r = Matrix::Identity(lv, lv);
  for (Eigen::Index i = 0; i < lv - 1; ++i) r(i, i) = static_cast<double>(k);
  return r;
}

struct Interferer {
  double alpha = 0.0;   // power ratio relative to the serving link
  Matrix h;             // Lv x Lv channel of the interfering AP at this user
};

/// Noise-plus-interference covariance: base + p_str * sum_l' alpha_l' H H^T.
/// The result is symmetrized; asymmetry beyond 1e-9 is an internal error.
inline Matrix interference_covariance(const Matrix& base, double p_str,
                                      std::span<const Interferer> interferers) {
  Matrix r = base;
  for (const auto& it : interferers) {
    if (it.alpha < 0.0) {
      throw std::domain_error("interference_covariance: alpha must be >= 0");
    }
    if (it.alpha == 0.0) continue;
    r.noalias() += p_str * it.alpha * (it.h * it.h.transpose());
  }
  const double asym = (r - r.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-9) {
    throw std::logic_error("interference_covariance: result not symmetric");
  }
  return 0.5 * (r + r.transpose());
}

struct BiaConfig {
  int lv = 2;            // transmitters per AP
  int k_users = 1;       // users served by the AP's transmission block
  double p_str = 1.0;    // noise-normalized power per stream
  double bandwidth_hz = 5e9;
};

namespace detail {

/// log2 det of a symmetric positive definite matrix via Cholesky.
inline double log2_det_spd(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("bia_rate: covariance not positive definite");
  }
  double log_det = 0.0;
  const auto& l = llt.matrixLLT();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    log_det += std::log2(l(i, i));
  }
  return 2.0 * log_det;
}

}  // namespace detail

/// Achievable rate of one AP-user pair, in bit/s:
/// bandwidth * B * log2 det(I + p_str H H^T R^-1), with B the alignment
/// ratio. Uses log2 det(R + p H H^T) - log2 det(R) for stability. Channels
/// are quasi-static within a period, so no expectation is taken.
inline double bia_rate(const Matrix& h, const BiaConfig& cfg,
                       const Matrix& r_noise) {
  detail::check_dims(cfg.lv, cfg.k_users);
  if (h.rows() != cfg.lv || h.cols() != cfg.lv) {
    throw ShapeError("bia_rate: channel matrix must be lv x lv");
  }
  if (!h.allFinite() || h.minCoeff() < 0.0) {
    throw std::domain_error("bia_rate: channel must be finite nonnegative");
  }
  if (cfg.p_str <= 0.0) throw std::domain_error("bia_rate: p_str must be > 0");
  const Matrix grown = r_noise + cfg.p_str * (h * h.transpose());
  const double log_det =
      detail::log2_det_spd(grown) - detail::log2_det_spd(r_noise);
  const double b = alignment_ratio(cfg.lv, cfg.k_users).value();
  // Clamp tiny negative round-off from the subtraction of the two factors.
  return cfg.bandwidth_hz * b * std::max(log_det, 0.0);
}

}  // namespace owc::bia
