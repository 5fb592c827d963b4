#pragma once

#include <vector>

#include "owcsim/optics.hpp"

namespace owc::testsupport {

// Ceiling AP with lv transmitters in a linear array along x, centered on the
// AP position.
inline optics::AccessPoint make_ap(int id, const Vec3& position, int lv,
                                   double spacing_m, double power_w,
                                   const optics::BeamParams& beam) {
  optics::AccessPoint ap;
  ap.id = id;
  ap.position = position;
  const double origin = -0.5 * spacing_m * static_cast<double>(lv - 1);
  for (int i = 0; i < lv; ++i) {
    optics::Transmitter tx;
    tx.position = position + Vec3(origin + spacing_m * static_cast<double>(i), 0.0, 0.0);
    tx.power_w = power_w;
    tx.beam = beam;
    ap.transmitters.push_back(tx);
  }
  return ap;
}

inline optics::Photodiode default_photodiode() {
  return optics::Photodiode::from_area(15e-6, 0.9, 45.0);
}

}  // namespace owc::testsupport
