#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "fesarm/arm_model.hpp"
#include "fesarm/dynamics.hpp"
#include "fesarm/kinematics.hpp"
#include "fesarm/muscle.hpp"

namespace fesarm {

struct SimState {
  JointState q;
  std::vector<MuscleState> muscles;
  double time = 0.0;

  static SimState rest(const ArmModel& m, const DofVector& theta) {
    SimState s;
    s.q = {theta, DofVector::Zero(m.dof_count())};
    s.muscles.assign(m.muscles.size(), MuscleState{});
    return s;
  }
};

struct TelemetrySample {
  double time = 0.0;
  DofVector theta;
  DofVector theta_dot;
  std::vector<double> activation;
  std::vector<double> force;
};

struct SimOptions {
  double substep = 1e-3;     ///< physics step h [s]
  int telemetry_every = 10;  ///< substeps between telemetry samples
};

/// Fixed-step integrator for one arm. Holds scratch buffers so that a step
/// does not allocate; the model must outlive it.
class Simulator {
public:
  explicit Simulator(const ArmModel& model, SimOptions options = {}) : model_(&model), options_(options) {
    validate(model);
    forces_.resize(model.muscles.size());
  }

  const ArmModel& model() const { return *model_; }
  const SimOptions& options() const { return options_; }

  /// Advances one control period with excitations held constant (zero-order
  /// hold). Semi-implicit Euler at the substep: activations first, then
  /// velocities from the new forces, then positions from the new velocities.
  /// Viscous joint terms are taken implicitly in the new velocity.
  SimState step(SimState s, std::span<const double> excitations, double dt_control,
                std::vector<TelemetrySample>* telemetry = nullptr) {
    const ArmModel& m = *model_;
    if (static_cast<int>(excitations.size()) != m.muscle_count())
      throw InvalidInput("step: one excitation per muscle required");
    if (!(dt_control > 0)) throw InvalidInput("step: control period must be positive");
    const int substeps = std::max(1, static_cast<int>(std::lround(dt_control / options_.substep)));
    const double h = dt_control / substeps;
    for (int k = 0; k < substeps; ++k) {
      muscle_geometry(m, s.q.theta, geometry_);
      for (int i = 0; i < m.muscle_count(); ++i) {
        s.muscles[i] = activation_step(s.muscles[i], excitations[i], h, m.muscles[i].muscle);
        forces_[i] = mtu_force(m.muscles[i].muscle, s.muscles[i], geometry_.length[i],
                               geometry_.velocity(i, s.q.theta_dot), m.curves);
      }
      const DofVector tau = muscle_torques(m, geometry_, forces_) + joint_passive_torque(m, s.q);
      const DofVector hd = h * joint_damping(m, s.q);
      const DofVector qdd = solve_accelerations(m, body_frames(m, to_array(s.q.theta)), s.q.theta_dot, tau, &hd);
      s.q.theta_dot += h * qdd;
      s.q.theta += h * s.q.theta_dot;
      s.time += h;
      if (!s.q.theta.allFinite() || !s.q.theta_dot.allFinite())
        throw SimulationDiverged("non-finite joint state", k);
      if (telemetry && ((k + 1) % options_.telemetry_every == 0)) {
        TelemetrySample t{s.time, s.q.theta, s.q.theta_dot, {}, forces_};
        for (const MuscleState& ms : s.muscles) t.activation.push_back(ms.activation);
        telemetry->push_back(std::move(t));
      }
    }
    return s;
  }

private:
  const ArmModel* model_;
  SimOptions options_;
  MuscleGeometry geometry_;
  std::vector<double> forces_;
};

}  // namespace fesarm
