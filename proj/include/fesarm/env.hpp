#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "fesarm/arm_model.hpp"
#include "fesarm/default_models.hpp"
#include "fesarm/errors.hpp"
#include "fesarm/rng.hpp"
#include "fesarm/simulator.hpp"

namespace fesarm {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// One electrode pair: every listed muscle receives the channel's intensity.
struct Channel {
  std::string name;
  std::vector<int> muscles;
};

struct EnvConfig {
  Variant variant = Variant::Planar;
  double dt_control = 0.1;
  int horizon = 100;
  int target_switch_step = 50;  ///< first step whose reward uses the resampled target
  std::vector<Range> target_ranges;
  std::vector<Range> init_ranges;
  std::vector<Channel> channels;
  bool mean_over_dofs = false;  ///< aggregate squared angle error as a mean instead of a sum
  std::uint64_t seed = 0;

  int action_dim() const { return static_cast<int>(channels.size()); }
  int dof_count() const { return static_cast<int>(target_ranges.size()); }
  int observation_dim() const { return 3 * dof_count(); }
};

/// Electrode grouping: both biceps-side flexors share one pair, both triceps
/// heads share one, and in 3D the lateral and anterior deltoids share one.
inline std::vector<Channel> default_channels(const ArmModel& m) {
  const auto idx = [&](const char* name) {
    const int i = m.muscle_index(name);
    if (i < 0) throw ModelConfigError(std::string("model lacks muscle '") + name + "' required by the channel map");
    return i;
  };
  std::vector<Channel> c = {{"biceps", {idx("brachialis"), idx("biceps_short")}},
                            {"triceps", {idx("triceps_medial"), idx("triceps_long")}},
                            {"pectoralis", {idx("pect_major_c")}},
                            {"delt_post", {idx("delt_post")}}};
  if (m.variant == Variant::ThreeD) c.push_back({"delt_lat_ant", {idx("delt_lat"), idx("delt_ant")}});
  return c;
}

// Antagonist channel pairs used for co-contraction reporting.
inline std::vector<std::pair<int, int>> antagonist_pairs(Variant v) {
  std::vector<std::pair<int, int>> p = {{0, 1}, {2, 3}};
  if (v == Variant::ThreeD) p.emplace_back(4, 3);
  return p;
}

inline EnvConfig default_env_config(const ArmModel& m, std::uint64_t seed = 0, double margin_deg = 10.0) {
  EnvConfig c;
  c.variant = m.variant;
  c.seed = seed;
  for (const Dof& d : m.dofs) {
    const Range r{d.limit.lower + deg(margin_deg), d.limit.upper - deg(margin_deg)};
    c.target_ranges.push_back(r);
    c.init_ranges.push_back(r);
  }
  c.channels = default_channels(m);
  return c;
}

inline void validate(const EnvConfig& c, const ArmModel& m) {
  if (c.variant != m.variant) throw InvalidInput("environment and model variants differ");
  if (!(c.dt_control > 0) || c.horizon <= 0) throw InvalidInput("dt_control and horizon must be positive");
  if (c.target_switch_step <= 0 || c.target_switch_step >= c.horizon)
    throw InvalidInput("target_switch_step must lie inside the episode");
  if (c.dof_count() != m.dof_count() || static_cast<int>(c.init_ranges.size()) != m.dof_count())
    throw InvalidInput("one target and init range per DOF required");
  for (const auto* ranges : {&c.target_ranges, &c.init_ranges})
    for (const Range& r : *ranges)
      if (!(r.lo <= r.hi)) throw InvalidInput("range lower bound above upper bound");
  const int expected = m.variant == Variant::Planar ? 4 : 5;
  if (c.action_dim() != expected) throw InvalidInput("channel map must have " + std::to_string(expected) + " channels");
  std::vector<int> seen(m.muscle_count(), 0);
  for (const Channel& ch : c.channels)
    for (int i : ch.muscles) {
      if (i < 0 || i >= m.muscle_count()) throw InvalidInput("channel references unknown muscle");
      ++seen[i];
    }
  for (int s : seen)
    if (s != 1) throw InvalidInput("every stimulable muscle must belong to exactly one channel");
}

struct Observation {
  DofVector theta;
  DofVector theta_dot;
  DofVector theta_target;

  int dim() const { return static_cast<int>(theta.size() * 3); }
  Eigen::VectorXd flat() const {
    const auto n = theta.size();
    Eigen::VectorXd v(3 * n);
    v << theta, theta_dot, theta_target;
    return v;
  }
};

using Action = Eigen::VectorXd;

struct Transition {
  Observation s;
  Action a;
  double r = 0.0;
  Observation s_next;
  bool done = false;
};

inline std::vector<double> map_channels(const EnvConfig& c, const Action& a, int muscle_count) {
  if (a.size() != c.action_dim()) throw InvalidInput("action has wrong dimension");
  std::vector<double> e(muscle_count, 0.0);
  for (int k = 0; k < c.action_dim(); ++k) {
    const double v = a[k];
    if (!std::isfinite(v)) throw InvalidInput("non-finite stimulation intensity");
    for (int i : c.channels[k].muscles) e[i] = std::clamp(v, 0.0, 1.0);
  }
  return e;
}

inline int stimulated_muscle_count(const EnvConfig& c) {
  int n = 0;
  for (const Channel& ch : c.channels) n += static_cast<int>(ch.muscles.size());
  return n;
}

/// r = -sum_d (theta_next - theta_target)^2 - (sum of per-muscle excitations) / n.
inline double reward(const DofVector& theta_next, const DofVector& theta_target, const Action& a, const EnvConfig& c) {
  if (theta_next.size() != theta_target.size()) throw InvalidInput("reward: angle dimensions differ");
  double err = (theta_next - theta_target).squaredNorm();
  if (c.mean_over_dofs) err /= static_cast<double>(theta_next.size());
  double stim = 0.0;
  for (int k = 0; k < c.action_dim(); ++k)
    stim += std::clamp(a[k], 0.0, 1.0) * static_cast<double>(c.channels[k].muscles.size());
  return -err - stim / stimulated_muscle_count(c);
}

/// Goal-conditioned reaching environment. Observation is [theta, theta_dot,
/// theta_target]; the target is resampled once per episode so that
/// observations from step `target_switch_step` onward carry the new target.
class ReachingEnv {
public:
  ReachingEnv(std::shared_ptr<const ArmModel> model, EnvConfig cfg, SimOptions sim = {})
      : model_(std::move(model)),
        cfg_(std::move(cfg)),
        sim_(*model_, sim),
        reset_rng_(Pcg32::derive(cfg_.seed, streams::kReset)),
        target_rng_(Pcg32::derive(cfg_.seed, streams::kTargets)) {
    validate(cfg_, *model_);
    state_ = SimState::rest(*model_, DofVector::Zero(model_->dof_count()));
    target_ = DofVector::Zero(model_->dof_count());
  }

  const EnvConfig& config() const { return cfg_; }
  const ArmModel& model() const { return *model_; }
  const SimState& sim_state() const { return state_; }
  const DofVector& target() const { return target_; }
  int step_index() const { return step_; }

  void reseed(std::uint64_t seed) {
    reset_rng_ = Pcg32::derive(seed, streams::kReset);
    target_rng_ = Pcg32::derive(seed, streams::kTargets);
  }

  /// Random posture at rest, zero activations, random target.
  Observation reset() {
    DofVector theta(model_->dof_count());
    for (int d = 0; d < theta.size(); ++d) theta[d] = sample(reset_rng_, cfg_.init_ranges[d]);
    state_ = SimState::rest(*model_, theta);
    target_ = sample_target();
    step_ = 0;
    return observe();
  }

  /// Deterministic start for tracking runs and point-to-point reaches.
  Observation reset_to(const DofVector& theta, const DofVector& target) {
    if (theta.size() != model_->dof_count() || target.size() != model_->dof_count())
      throw InvalidInput("reset_to: dimension mismatch");
    state_ = SimState::rest(*model_, theta);
    target_ = target;
    step_ = 0;
    return observe();
  }

  void set_target(const DofVector& target) {
    if (target.size() != model_->dof_count()) throw InvalidInput("set_target: dimension mismatch");
    target_ = target;
  }

  Transition step(const Action& a, std::vector<TelemetrySample>* telemetry = nullptr) {
    if (step_ >= cfg_.horizon) throw InvalidInput("episode already finished; call reset()");
    Transition t;
    t.s = observe();
    t.a = a;
    excitations_ = map_channels(cfg_, a, model_->muscle_count());
    state_ = sim_.step(std::move(state_), excitations_, cfg_.dt_control, telemetry);
    t.r = reward(state_.q.theta, target_, a, cfg_);
    ++step_;
    if (step_ == cfg_.target_switch_step) target_ = sample_target();
    t.done = step_ == cfg_.horizon;
    t.s_next = observe();
    return t;
  }

  Observation observe() const { return {state_.q.theta, state_.q.theta_dot, target_}; }

private:
  static double sample(Pcg32& rng, const Range& r) { return r.lo == r.hi ? r.lo : rng.uniform(r.lo, r.hi); }
  DofVector sample_target() {
    DofVector t(model_->dof_count());
    for (int d = 0; d < t.size(); ++d) t[d] = sample(target_rng_, cfg_.target_ranges[d]);
    return t;
  }

  std::shared_ptr<const ArmModel> model_;
  EnvConfig cfg_;
  Simulator sim_;
  Pcg32 reset_rng_;
  Pcg32 target_rng_;
  SimState state_;
  DofVector target_;
  std::vector<double> excitations_;
  int step_ = 0;
};

using Policy = std::function<Action(const Observation&)>;

struct RmseReport {
  std::vector<double> episode_rmse_deg;
  double rmse_deg = 0.0;  ///< pooled over all steps, episodes and DOFs
  double mean_return = 0.0;
};

inline double to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Pooled squared angle error in degrees.
class RmseAccumulator {
public:
  void add(const DofVector& theta, const DofVector& target) {
    if (theta.size() != target.size()) throw InvalidInput("rmse: angle dimensions differ");
    sq_ += (theta - target).squaredNorm();
    n_ += theta.size();
  }
  void merge(const RmseAccumulator& o) {
    sq_ += o.sq_;
    n_ += o.n_;
  }
  long count() const { return n_; }
  double rmse_deg() const { return n_ == 0 ? 0.0 : to_deg(std::sqrt(sq_ / static_cast<double>(n_))); }

private:
  double sq_ = 0.0;
  long n_ = 0;
};

/// Runs n episodes with the given (deterministic) policy. The error of each
/// step is theta after the step against the target the step was rewarded on.
/// `on_reset` runs before every episode (for policies with memory).
inline RmseReport evaluate_rmse(const Policy& policy, ReachingEnv& env, int n_episodes,
                                const std::function<void()>& on_reset = {}) {
  RmseReport rep;
  RmseAccumulator pooled;
  double returns = 0.0;
  for (int e = 0; e < n_episodes; ++e) {
    if (on_reset) on_reset();
    Observation obs = env.reset();
    RmseAccumulator ep;
    for (;;) {
      const DofVector target = env.target();
      const Transition t = env.step(policy(obs));
      ep.add(t.s_next.theta, target);
      returns += t.r;
      obs = t.s_next;
      if (t.done) break;
    }
    rep.episode_rmse_deg.push_back(ep.rmse_deg());
    pooled.merge(ep);
  }
  rep.rmse_deg = pooled.rmse_deg();
  rep.mean_return = returns / std::max(n_episodes, 1);
  return rep;
}

}  // namespace fesarm
