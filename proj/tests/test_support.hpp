#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "fesarm/calibration.hpp"
#include "fesarm/default_models.hpp"

namespace fesarm::testing {

// Calibrated default model, computed once per process.
inline const ArmModel& calibrated(Variant v) {
  static const auto make = [](Variant var) {
    ArmModel m = default_model(var);
    Pcg32 rng = Pcg32::derive(0, streams::kCalibration);
    return apply_slack(m, calibrate_tendon_slack(m, rng).slack);
  };
  static const ArmModel planar = make(Variant::Planar);
  static const ArmModel three_d = make(Variant::ThreeD);
  return v == Variant::Planar ? planar : three_d;
}

inline DofVector random_posture(const ArmModel& m, Pcg32& rng) {
  DofVector q(m.dof_count());
  for (int d = 0; d < m.dof_count(); ++d) q[d] = rng.uniform(m.dofs[d].limit.lower, m.dofs[d].limit.upper);
  return q;
}

// A posture where no muscle carries passive force (every fibre at or below l_opt).
inline DofVector slack_posture(const ArmModel& m) {
  Pcg32 rng(1);
  for (int k = 0; k < 1000; ++k) {
    DofVector q = mid_range_posture(m);
    if (k > 0)
      for (int d = 0; d < q.size(); ++d) q[d] = rng.uniform(m.dofs[d].limit.lower + 0.2, m.dofs[d].limit.upper - 0.2);
    const MuscleGeometry g = muscle_geometry(m, q);
    bool zero = true;
    for (int i = 0; i < m.muscle_count(); ++i)
      zero = zero && passive_mtu_force(m.muscles[i].muscle, g.length[i], m.curves) == 0.0;
    if (zero) return q;
  }
  throw std::runtime_error("no passive-free posture found");
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("fesarm_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace fesarm::testing
