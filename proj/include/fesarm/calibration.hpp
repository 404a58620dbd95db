#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "fesarm/arm_model.hpp"
#include "fesarm/cmaes.hpp"
#include "fesarm/env.hpp"
#include "fesarm/errors.hpp"
#include "fesarm/kinematics.hpp"
#include "fesarm/muscle.hpp"
#include "fesarm/rng.hpp"

namespace fesarm {

struct CalibrationOptions {
  int postures = 50;
  long budget = 5000;
  double lower_factor = 0.2;   ///< slack box relative to the initial value
  double upper_factor = 2.0;
  double sigma0 = 0.3;         ///< initial step in log-slack units
  double barrier_weight = 1e4;
  double regularization = 1e-6;  ///< weight of sum(log(s / s0)^2); selects the smallest change among optima
  double success_threshold = 1.0;  ///< J above this after the run counts as a failure [N^2 m^2]
  std::optional<std::vector<Range>> posture_ranges;  ///< defaults to the joint limits
};

struct PostureResidual {
  DofVector theta;
  DofVector torque;
};

struct CalibrationResult {
  std::vector<double> initial_slack;
  std::vector<double> slack;
  double objective_before = 0.0;  ///< sum of squared passive torques, without barrier or regulariser
  double objective_after = 0.0;
  long evaluations = 0;
  bool success = false;
  std::vector<PostureResidual> residuals;  ///< per-posture passive torques at the result
};

/// Passive joint torque of all muscles at zero activation.
inline DofVector passive_muscle_torque(const ArmModel& m, const MuscleGeometry& g, const std::vector<double>& slack) {
  DofVector tau = DofVector::Zero(m.dof_count());
  for (int i = 0; i < m.muscle_count(); ++i) {
    MuscleParams p = m.muscles[i].muscle;
    p.l_slack = slack[i];
    const double f = passive_mtu_force(p, g.length[i], m.curves);
    for (int d = 0; d < m.dof_count(); ++d) tau[d] += g.moment_arm(i, d) * f;
  }
  return tau;
}

inline std::vector<DofVector> sample_postures(const std::vector<Range>& ranges, int count, Pcg32& rng) {
  std::vector<DofVector> out;
  for (int k = 0; k < count; ++k) {
    DofVector q(static_cast<int>(ranges.size()));
    for (int d = 0; d < q.size(); ++d) q[d] = ranges[d].lo == ranges[d].hi ? ranges[d].lo : rng.uniform(ranges[d].lo, ranges[d].hi);
    out.push_back(q);
  }
  return out;
}

inline std::vector<Range> joint_limit_ranges(const ArmModel& m) {
  std::vector<Range> r;
  for (const Dof& d : m.dofs) r.push_back({d.limit.lower, d.limit.upper});
  return r;
}

/// Calibrates tendon slack lengths so that passive muscle torques vanish over
/// sampled static postures:
///   J(s) = sum_postures sum_dofs tau_passive^2
/// optimised with CMA-ES over x = log(s / s0), with a quadratic barrier
/// outside [lower_factor, upper_factor] * s0. The result is clamped into that
/// box. Geometry does not depend on slack, so it is evaluated once per posture.
inline CalibrationResult calibrate_tendon_slack(const ArmModel& m, Pcg32& rng, const CalibrationOptions& opt = {}) {
  validate(m);
  if (opt.postures < 1) throw InvalidInput("calibration needs at least one posture");
  if (!(opt.lower_factor > 0 && opt.lower_factor < 1 && opt.upper_factor > 1))
    throw InvalidInput("calibration box must contain the initial slack");
  const int n = m.muscle_count();
  CalibrationResult res;
  for (const MusclePath& p : m.muscles) {
    if (!(p.muscle.l_slack > 0)) throw InvalidInput("calibration needs positive initial slack for '" + p.muscle.name + "'");
    res.initial_slack.push_back(p.muscle.l_slack);
  }
  const auto ranges = opt.posture_ranges.value_or(joint_limit_ranges(m));
  if (static_cast<int>(ranges.size()) != m.dof_count()) throw InvalidInput("one posture range per DOF required");
  const auto postures = sample_postures(ranges, opt.postures, rng);
  std::vector<MuscleGeometry> geometry;
  for (const DofVector& q : postures) geometry.push_back(muscle_geometry(m, q));

  const auto torque_cost = [&](const std::vector<double>& slack) {
    double j = 0.0;
    for (const MuscleGeometry& g : geometry) j += passive_muscle_torque(m, g, slack).squaredNorm();
    return j;
  };
  const double lo = std::log(opt.lower_factor);
  const double hi = std::log(opt.upper_factor);
  const auto to_slack = [&](const Eigen::VectorXd& x) {
    std::vector<double> s(n);
    for (int i = 0; i < n; ++i) s[i] = res.initial_slack[i] * std::exp(std::clamp(x[i], lo, hi));
    return s;
  };
  const Objective objective = [&](const Eigen::VectorXd& x) {
    double penalty = 0.0;
    for (int i = 0; i < n; ++i) {
      const double excess = std::max(x[i] - hi, 0.0) + std::max(lo - x[i], 0.0);
      penalty += opt.barrier_weight * excess * excess;
    }
    return torque_cost(to_slack(x)) + opt.regularization * x.squaredNorm() + penalty;
  };

  res.objective_before = torque_cost(res.initial_slack);
  const CmaResult cma = cmaes_minimize(objective, Eigen::VectorXd::Zero(n), opt.sigma0, opt.budget, rng);
  res.slack = to_slack(cma.x_best);
  res.objective_after = torque_cost(res.slack);
  res.evaluations = cma.evaluations;
  res.success = res.objective_after <= opt.success_threshold;
  for (std::size_t k = 0; k < postures.size(); ++k)
    res.residuals.push_back({postures[k], passive_muscle_torque(m, geometry[k], res.slack)});
  return res;
}

inline ArmModel apply_slack(ArmModel m, const std::vector<double>& slack) {
  if (static_cast<int>(slack.size()) != m.muscle_count()) throw InvalidInput("one slack length per muscle required");
  for (int i = 0; i < m.muscle_count(); ++i) m.muscles[i].muscle.l_slack = slack[i];
  m.calibrated = true;
  return m;
}

/// Largest absolute passive muscle joint torque over the given postures.
inline double max_passive_torque(const ArmModel& m, const std::vector<DofVector>& postures) {
  std::vector<double> slack;
  for (const MusclePath& p : m.muscles) slack.push_back(p.muscle.l_slack);
  double worst = 0.0;
  for (const DofVector& q : postures)
    worst = std::max(worst, passive_muscle_torque(m, muscle_geometry(m, q), slack).cwiseAbs().maxCoeff());
  return worst;
}

}  // namespace fesarm
