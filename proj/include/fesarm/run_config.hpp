#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>

#include <json.hpp>

#include "fesarm/arm_model.hpp"
#include "fesarm/calibration.hpp"
#include "fesarm/default_models.hpp"
#include "fesarm/env.hpp"
#include "fesarm/errors.hpp"
#include "fesarm/model_io.hpp"
#include "fesarm/sac.hpp"

namespace fesarm {

inline constexpr int kRunConfigVersion = 1;

/// Everything a training or evaluation run depends on. Stored as JSON; the
/// hash of its canonical form ties every output file to the run.
struct RunConfig {
  Variant variant = Variant::Planar;
  std::string model_path;  ///< empty: the built-in model, calibrated in-process
  double target_margin_deg = 10.0;
  bool mean_over_dofs = false;
  SacConfig sac;
  ObservationEncoder encoder;
  int train_episodes = 300;
  int eval_every = 5;
  int eval_episodes = 50;
  int n_seeds = 10;
  std::uint64_t seed_base = 1;
  // Analysis thresholds.
  double burst_ratio = 1.5;
  int burst_window = 5;
  int steady_window = 10;
  double prominence_fraction = 0.2;
  // Execution only; not part of the hash.
  std::string out_dir = "runs";
  int jobs = 1;
  bool resume = false;  ///< keep seeds whose checkpoint already carries this config hash
};

inline void validate(const RunConfig& c) {
  if (c.train_episodes <= 0 || c.eval_every <= 0 || c.eval_episodes <= 0 || c.n_seeds <= 0 || c.jobs <= 0)
    throw InvalidInput("run config: episode, seed and job counts must be positive");
  if (c.burst_window <= 0 || c.steady_window <= 0 || !(c.burst_ratio > 0) || !(c.prominence_fraction >= 0))
    throw InvalidInput("run config: bad analysis thresholds");
  if (c.sac.hidden <= 0 || c.sac.batch_size <= 0 || c.sac.buffer_capacity <= 0 || c.sac.updates_per_step < 0 ||
      !(c.sac.gamma >= 0 && c.sac.gamma <= 1) || !(c.sac.tau > 0 && c.sac.tau <= 1) || !(c.sac.init_alpha > 0))
    throw InvalidInput("run config: bad agent hyperparameters");
}

/// Settings that determine results (no output directory, no job count).
inline nlohmann::ordered_json substance_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["run_config_version"] = kRunConfigVersion;
  j["variant"] = to_string(c.variant);
  j["model_path"] = c.model_path;
  j["env"] = {{"target_margin_deg", c.target_margin_deg}, {"mean_over_dofs", c.mean_over_dofs}};
  const SacConfig& s = c.sac;
  j["agent"] = {{"hidden", s.hidden},
                {"lr_actor", s.lr_actor},
                {"lr_critic", s.lr_critic},
                {"lr_alpha", s.lr_alpha},
                {"gamma", s.gamma},
                {"tau", s.tau},
                {"batch_size", s.batch_size},
                {"buffer_capacity", s.buffer_capacity},
                {"warmup_steps", s.warmup_steps},
                {"updates_per_step", s.updates_per_step},
                {"init_alpha", s.init_alpha},
                {"log_std_min", s.log_std_min},
                {"log_std_max", s.log_std_max},
                {"target_entropy_per_dim", s.target_entropy_per_dim},
                {"velocity_scale", c.encoder.velocity_scale},
                {"append_error", c.encoder.append_error},
                {"append_previous_action", c.encoder.append_previous_action}};
  j["training"] = {{"train_episodes", c.train_episodes},
                   {"eval_every", c.eval_every},
                   {"eval_episodes", c.eval_episodes},
                   {"n_seeds", c.n_seeds},
                   {"seed_base", c.seed_base}};
  j["analysis"] = {{"burst_ratio", c.burst_ratio},
                   {"burst_window", c.burst_window},
                   {"steady_window", c.steady_window},
                   {"prominence_fraction", c.prominence_fraction}};
  return j;
}

inline nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j = substance_json(c);
  j["output"] = {{"out_dir", c.out_dir}, {"jobs", c.jobs}, {"resume", c.resume}};
  return j;
}

/// 64-bit FNV-1a of the canonical substance JSON, as 16 hex digits.
inline std::string config_hash(const RunConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : substance_json(c).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Missing keys keep their defaults; unknown versions are rejected.
inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    if (j.value("run_config_version", kRunConfigVersion) != kRunConfigVersion)
      throw ModelConfigError("unsupported run_config_version");
    c.variant = variant_from_string(j.value("variant", to_string(c.variant)));
    c.model_path = j.value("model_path", c.model_path);
    if (j.contains("env")) {
      const auto& e = j["env"];
      c.target_margin_deg = e.value("target_margin_deg", c.target_margin_deg);
      c.mean_over_dofs = e.value("mean_over_dofs", c.mean_over_dofs);
    }
    if (j.contains("agent")) {
      const auto& a = j["agent"];
      SacConfig& s = c.sac;
      s.hidden = a.value("hidden", s.hidden);
      s.lr_actor = a.value("lr_actor", s.lr_actor);
      s.lr_critic = a.value("lr_critic", s.lr_critic);
      s.lr_alpha = a.value("lr_alpha", s.lr_alpha);
      s.gamma = a.value("gamma", s.gamma);
      s.tau = a.value("tau", s.tau);
      s.batch_size = a.value("batch_size", s.batch_size);
      s.buffer_capacity = a.value("buffer_capacity", s.buffer_capacity);
      s.warmup_steps = a.value("warmup_steps", s.warmup_steps);
      s.updates_per_step = a.value("updates_per_step", s.updates_per_step);
      s.init_alpha = a.value("init_alpha", s.init_alpha);
      s.log_std_min = a.value("log_std_min", s.log_std_min);
      s.log_std_max = a.value("log_std_max", s.log_std_max);
      s.target_entropy_per_dim = a.value("target_entropy_per_dim", s.target_entropy_per_dim);
      c.encoder.velocity_scale = a.value("velocity_scale", c.encoder.velocity_scale);
      c.encoder.append_error = a.value("append_error", c.encoder.append_error);
      c.encoder.append_previous_action = a.value("append_previous_action", c.encoder.append_previous_action);
    }
    if (j.contains("training")) {
      const auto& t = j["training"];
      c.train_episodes = t.value("train_episodes", c.train_episodes);
      c.eval_every = t.value("eval_every", c.eval_every);
      c.eval_episodes = t.value("eval_episodes", c.eval_episodes);
      c.n_seeds = t.value("n_seeds", c.n_seeds);
      c.seed_base = t.value("seed_base", c.seed_base);
    }
    if (j.contains("analysis")) {
      const auto& a = j["analysis"];
      c.burst_ratio = a.value("burst_ratio", c.burst_ratio);
      c.burst_window = a.value("burst_window", c.burst_window);
      c.steady_window = a.value("steady_window", c.steady_window);
      c.prominence_fraction = a.value("prominence_fraction", c.prominence_fraction);
    }
    if (j.contains("output")) {
      c.out_dir = j["output"].value("out_dir", c.out_dir);
      c.jobs = j["output"].value("jobs", c.jobs);
      c.resume = j["output"].value("resume", c.resume);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ModelConfigError("malformed run config: " + std::string(e.what()));
  }
  validate(c);
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelConfigError("cannot open run config '" + path + "'");
  try {
    return run_config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ModelConfigError("run config '" + path + "' is not valid JSON: " + e.what());
  }
}

/// The arm for a run: the configured file, or the built-in model of the
/// variant with tendon slack calibrated from a fixed seed.
inline ArmModel resolve_model(const RunConfig& c) {
  if (!c.model_path.empty()) {
    ArmModel m = load_model(c.model_path);
    if (m.variant != c.variant)
      throw ModelConfigError("model '" + c.model_path + "' is " + to_string(m.variant) + ", run wants " +
                             to_string(c.variant));
    return m;
  }
  ArmModel m = default_model(c.variant);
  Pcg32 rng = Pcg32::derive(0, streams::kCalibration);
  return apply_slack(m, calibrate_tendon_slack(m, rng).slack);
}

inline EnvConfig make_env_config(const RunConfig& c, const ArmModel& m, std::uint64_t seed) {
  EnvConfig e = default_env_config(m, seed, c.target_margin_deg);
  e.mean_over_dofs = c.mean_over_dofs;
  return e;
}

}  // namespace fesarm
