#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "owcsim/common.hpp"

namespace owc::optics {

/// Gaussian beam geometry of a VCSEL transmitter. The Rayleigh range is
/// derived from waist and wavelength on construction and never stored stale.
struct BeamParams {
  double waist_m = 0.0;
  double wavelength_m = 0.0;
  double rayleigh_range_m = 0.0;

  static BeamParams make(double waist_m, double wavelength_m);
};

/// d_Ra = pi * w0^2 / lambda.
inline double rayleigh_range(double waist_m, double wavelength_m) {
  if (waist_m <= 0.0 || wavelength_m <= 0.0) {
    throw std::domain_error("rayleigh_range: waist and wavelength must be > 0");
  }
  return std::numbers::pi * waist_m * waist_m / wavelength_m;
}

inline BeamParams BeamParams::make(double waist_m, double wavelength_m) {
  BeamParams b;
  b.waist_m = waist_m;
  b.wavelength_m = wavelength_m;
  b.rayleigh_range_m = rayleigh_range(waist_m, wavelength_m);
  return b;
}

/// Beam radius after propagating distance d: W_d = W0 sqrt(1 + (d/d_Ra)^2).
inline double beam_radius(const BeamParams& beam, double distance_m) {
  if (distance_m < 0.0) {
    throw std::domain_error("beam_radius: distance must be >= 0");
  }
  const double q = distance_m / beam.rayleigh_range_m;
  return beam.waist_m * std::sqrt(1.0 + q * q);
}

/// Transverse intensity profile at radial offset r from the beam axis.
inline double intensity(double power_w, double beam_radius_m, double radial_m) {
  if (beam_radius_m <= 0.0) {
    throw std::domain_error("intensity: beam radius must be > 0");
  }
  if (radial_m < 0.0) {
    throw std::domain_error("intensity: radial offset must be >= 0");
  }
  const double w2 = beam_radius_m * beam_radius_m;
  return (2.0 * power_w / (std::numbers::pi * w2)) *
         std::exp(-2.0 * radial_m * radial_m / w2);
}

/// Power captured by a centered detector disk of radius rm:
/// P = Pt (1 - exp(-2 rm^2 / W_d^2)). Equals the radial integral of the
/// intensity profile over the disk.
inline double received_power(double power_w, double beam_radius_m,
                             double detector_radius_m) {
  if (beam_radius_m <= 0.0) {
    throw std::domain_error("received_power: beam radius must be > 0");
  }
  if (detector_radius_m < 0.0) {
    throw std::domain_error("received_power: detector radius must be >= 0");
  }
  const double q = detector_radius_m / beam_radius_m;
  return power_w * (1.0 - std::exp(-2.0 * q * q));
}

/// Capture for a detector whose center sits at lateral offset rho from the
/// beam axis. Exact axial integral while the disk is nearly centered
/// (rho <= 2 rm); local-intensity approximation I(rho) * A otherwise, valid
/// because detector radii (mm) are far below floor-level beam radii (cm-dm).
inline double received_power_offaxis(double power_w, double beam_radius_m,
                                     double detector_radius_m,
                                     double lateral_offset_m) {
  if (lateral_offset_m <= 2.0 * detector_radius_m) {
    return received_power(power_w, beam_radius_m, detector_radius_m);
  }
  const double area = std::numbers::pi * detector_radius_m * detector_radius_m;
  return intensity(power_w, beam_radius_m, lateral_offset_m) * area;
}

/// Photodiode bank of a user terminal. `area_m2` is the whole receiver area
/// divided by the number of photodiodes.
struct Photodiode {
  double radius_m = 0.0;
  double area_m2 = 0.0;
  double responsivity_a_per_w = 0.0;
  double fov_deg = 45.0;

  static Photodiode from_area(double area_m2, double responsivity,
                              double fov_deg) {
    Photodiode p;
    p.area_m2 = area_m2;
    p.radius_m = std::sqrt(area_m2 / std::numbers::pi);
    p.responsivity_a_per_w = responsivity;
    p.fov_deg = fov_deg;
    return p;
  }
};

struct Transmitter {
  Vec3 position = Vec3::Zero();
  double power_w = 0.0;
  BeamParams beam;
};

/// Ceiling unit housing a compact array of VCSELs. The array boresight is
/// steered at the served user; the per-transmitter displacement from the
/// array center is what remains as lateral offset at the receiver.
struct AccessPoint {
  int id = 0;
  Vec3 position = Vec3::Zero();
  std::vector<Transmitter> transmitters;
};

struct UserState {
  int id = 0;
  Vec3 position = Vec3::Zero();
  int num_photodiodes = 1;
  double demand_min_bps = 0.0;
  double demand_max_bps = 0.0;
};

/// Coverage test: angle between the detector normal (up) and the AP-user
/// line must not exceed the receiver field of view.
inline bool in_field_of_view(const Vec3& ap_position, const Vec3& user_position,
                             double fov_deg) {
  const Vec3 to_ap = ap_position - user_position;
  const double dist = to_ap.norm();
  if (dist <= 0.0) return true;
  const double cos_angle = to_ap.z() / dist;
  return cos_angle >= std::cos(fov_deg * std::numbers::pi / 180.0);
}

/// Optical power collected from one transmitter of a steered array.
/// The boresight runs from the array center to the user; transmitter i is
/// displaced from the center, so its beam axis is parallel-shifted by the
/// component of that displacement perpendicular to the boresight.
inline double steered_transmitter_power(const Transmitter& tx,
                                        const Vec3& array_center,
                                        const Vec3& user_position,
                                        const Photodiode& pd) {
  const Vec3 boresight = user_position - array_center;
  const double range = boresight.norm();
  if (range <= 0.0) return 0.0;
  const Vec3 u = boresight / range;
  const Vec3 displacement = tx.position - array_center;
  const Vec3 v = user_position - tx.position;
  const double axial = v.dot(u);
  if (axial <= 0.0) return 0.0;
  const Vec3 lateral_vec = displacement - displacement.dot(u) * u;
  const double lateral = lateral_vec.norm();
  const double w_d = beam_radius(tx.beam, axial);
  return received_power_offaxis(tx.power_w, w_d, pd.radius_m, lateral);
}

inline double total_received_power(const AccessPoint& ap, const UserState& user,
                                   const Photodiode& pd) {
  if (!in_field_of_view(ap.position, user.position, pd.fov_deg)) return 0.0;
  double total = 0.0;
  for (const auto& tx : ap.transmitters) {
    total += steered_transmitter_power(tx, ap.position, user.position, pd);
  }
  return total;
}

/// Lv x Lv channel response of one AP at one user. Row m is the channel
/// vector under detector mode m: the photodiode bank oriented toward
/// transmitter m keeps that transmitter's gain at full weight and scales the
/// others by the misalignment factor gamma. Entries are responsivity times
/// received optical power. Out-of-coverage users get the zero matrix.
/// Mode construction keeps the matrix full rank whenever all transmitter
/// powers are positive.
inline Matrix channel_gain(const AccessPoint& ap, const UserState& user,
                           const Photodiode& pd, double misalignment_gamma) {
  const auto lv = static_cast<Eigen::Index>(ap.transmitters.size());
  Matrix h = Matrix::Zero(lv, lv);
  if (!in_field_of_view(ap.position, user.position, pd.fov_deg)) return h;
  Vector gains(lv);
  for (Eigen::Index i = 0; i < lv; ++i) {
    const double p = steered_transmitter_power(
        ap.transmitters[static_cast<std::size_t>(i)], ap.position,
        user.position, pd);
    gains[i] = pd.responsivity_a_per_w * p;
  }
  for (Eigen::Index m = 0; m < lv; ++m) {
    for (Eigen::Index i = 0; i < lv; ++i) {
      h(m, i) = gains[i] * (m == i ? 1.0 : misalignment_gamma);
    }
  }
  return h;
}

struct SirOptions {
  double degenerate_cap = 1e6;
};

/// Signal-to-interference power ratio at a user: total received power from
/// the interfering AP over total received power from the serving AP.
/// Zero when the interferer is out of view; capped and flagged when the
/// serving link itself carries no power.
inline double sir_alpha(const AccessPoint& serving, const AccessPoint& interferer,
                        const UserState& user, const Photodiode& pd,
                        const SirOptions& opts = {},
                        bool* degenerate = nullptr) {
  if (degenerate != nullptr) *degenerate = false;
  const double p_int = total_received_power(interferer, user, pd);
  if (p_int <= 0.0) return 0.0;
  const double p_srv = total_received_power(serving, user, pd);
  if (p_srv <= 0.0) {
    if (degenerate != nullptr) *degenerate = true;
    return opts.degenerate_cap;
  }
  return std::min(p_int / p_srv, opts.degenerate_cap);
}

}  // namespace owc::optics
