#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "fesarm/errors.hpp"

namespace fesarm {

/// Constants of a Hill-type musculotendon unit (rigid tendon, zero pennation).
struct MuscleParams {
  std::string name;
  double f_max = 500.0;      ///< maximum isometric force [N]
  double l_opt = 0.10;       ///< optimal fibre length [m]
  double l_slack = 0.10;     ///< tendon slack length [m]
  double v_max = 10.0;       ///< maximum shortening velocity [l_opt / s]
  double tau_act = 0.100;    ///< activation time constant [s]
  double tau_deact = 0.060;  ///< deactivation time constant [s]
};

struct MuscleState {
  double activation = 0.0;
};

/// Shape constants of the normalised force curves.
struct CurveParams {
  double fl_width = 0.45;         ///< Gaussian width w of the active force-length curve
  double fp_shape = 4.0;          ///< exponential shape k of the passive curve
  double fp_strain = 0.6;         ///< normalised stretch at which passive force equals f_max
  double fv_curvature = 0.25;     ///< Hill curvature of the concentric branch
  double fv_eccentric_max = 1.4;  ///< eccentric force plateau
};

inline void validate(const MuscleParams& p) {
  const auto bad = [&](const char* field) {
    throw ModelConfigError("muscle '" + p.name + "': " + field + " out of range");
  };
  if (!(p.f_max > 0.0)) bad("f_max");
  if (!(p.l_opt > 0.0)) bad("l_opt");
  if (!(p.l_slack >= 0.0)) bad("l_slack");
  if (!(p.v_max > 0.0)) bad("v_max");
  if (!(p.tau_act > 0.0)) bad("tau_act");
  if (!(p.tau_deact > 0.0)) bad("tau_deact");
}

/// Exact update of da/dt = (u - a) / tau over dt, with tau = tau_act while
/// activating (u >= a) and tau_deact while deactivating.
inline MuscleState activation_step(MuscleState state, double u, double dt, const MuscleParams& p) {
  if (!std::isfinite(u) || !std::isfinite(dt)) throw InvalidInput("activation_step: non-finite excitation or dt");
  if (!(dt > 0.0)) throw InvalidInput("activation_step: dt must be positive");
  u = std::clamp(u, 0.0, 1.0);
  const double a = state.activation;
  const double tau = (u >= a) ? p.tau_act : p.tau_deact;
  const double next = u + (a - u) * std::exp(-dt / tau);
  return MuscleState{std::clamp(next, 0.0, 1.0)};
}

inline double active_force_length(double l_norm, const CurveParams& c = {}) {
  const double x = l_norm - 1.0;
  return std::exp(-x * x / c.fl_width);
}

inline double passive_force_length(double l_norm, const CurveParams& c = {}) {
  if (l_norm <= 1.0) return 0.0;
  return (std::exp(c.fp_shape * (l_norm - 1.0) / c.fp_strain) - 1.0) / (std::exp(c.fp_shape) - 1.0);
}

// Shortening is negative. The eccentric branch is an exponential rise whose
// slope at v = 0 matches the concentric hyperbola, so the curve is C1.
inline double force_velocity(double v_norm, const CurveParams& c = {}) {
  if (v_norm < 0.0) {
    if (v_norm <= -1.0) return 0.0;
    return (1.0 + v_norm) / (1.0 - v_norm / c.fv_curvature);
  }
  const double rise = c.fv_eccentric_max - 1.0;
  const double slope = 1.0 + 1.0 / c.fv_curvature;
  return c.fv_eccentric_max - rise * std::exp(-slope * v_norm / rise);
}

inline double fiber_length(const MuscleParams& p, double l_mtu) {
  return std::max(l_mtu - p.l_slack, 0.01 * p.l_opt);
}

/// Rigid-tendon musculotendon force [N].
inline double mtu_force(const MuscleParams& p, const MuscleState& s, double l_mtu, double v_mtu,
                        const CurveParams& c = {}) {
  if (!std::isfinite(l_mtu) || !std::isfinite(v_mtu) || !std::isfinite(s.activation))
    throw InvalidInput("mtu_force: non-finite input for muscle '" + p.name + "'");
  const double l_norm = fiber_length(p, l_mtu) / p.l_opt;
  const double v_norm = v_mtu / (p.l_opt * p.v_max);
  const double active = s.activation * active_force_length(l_norm, c) * force_velocity(v_norm, c);
  return p.f_max * std::max(active + passive_force_length(l_norm, c), 0.0);
}

/// Passive-only force (zero activation); what tendon-slack calibration balances.
inline double passive_mtu_force(const MuscleParams& p, double l_mtu, const CurveParams& c = {}) {
  return p.f_max * passive_force_length(fiber_length(p, l_mtu) / p.l_opt, c);
}

}  // namespace fesarm
