// fesarm: calibrate muscle models, train and evaluate stimulation policies,
// track trajectories and analyse logs.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fesarm/analysis.hpp"
#include "fesarm/calibration.hpp"
#include "fesarm/checkpoint.hpp"
#include "fesarm/episode_log.hpp"
#include "fesarm/model_io.hpp"
#include "fesarm/run_config.hpp"
#include "fesarm/training.hpp"

namespace fs = std::filesystem;
using namespace fesarm;
using Json = nlohmann::ordered_json;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string variant;
  std::optional<int> jobs;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "run configuration (JSON)");
  app->add_option("--seed", c.seed, "base seed");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--variant", c.variant, "arm variant")->check(CLI::IsMember({"planar", "3d"}));
  app->add_option("--jobs", c.jobs, "parallel seeds")->check(CLI::PositiveNumber);
}

RunConfig resolve_config(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_run_config(c.config);
  if (!c.variant.empty()) {
    const Variant v = variant_from_string(c.variant);
    if (!c.config.empty() && !cfg.model_path.empty() && v != cfg.variant)
      throw InvalidInput("--variant contradicts the model in " + c.config);
    cfg.variant = v;
  }
  if (c.seed) cfg.seed_base = *c.seed;
  if (!c.out.empty()) cfg.out_dir = c.out;
  if (c.jobs) cfg.jobs = *c.jobs;
  validate(cfg);
  return cfg;
}

void write_json(const fs::path& p, const Json& j) {
  std::ofstream out(p);
  if (!out) throw InvalidInput("cannot write '" + p.string() + "'");
  out << j.dump(2) << '\n';
}

Json speed_json(const SpeedProfile& p) {
  return {{"local_maxima", p.local_maxima},
          {"dominant_maxima", p.dominant_maxima},
          {"peak_speed_m_s", p.peak_speed},
          {"time_to_peak_fraction", p.time_to_peak_fraction},
          {"normalized_jerk", p.normalized_jerk}};
}

Json burst_json(const BurstReport& r) {
  Json sw = Json::array();
  for (const SwitchBurst& s : r.switches) {
    Json j{{"step", s.step}, {"evaluated", s.evaluated}};
    if (s.evaluated) {
      j["post_mean"] = s.post_mean;
      j["steady_mean"] = s.steady_mean;
      j["ratio"] = s.ratio;
      j["burst"] = s.burst;
      j["co_contraction"] = s.co_contraction;
    } else {
      j["note"] = s.note;
    }
    sw.push_back(j);
  }
  return {{"switches", sw},
          {"evaluated", r.evaluated},
          {"flagged", r.flagged},
          {"flagged_fraction", r.flagged_fraction()},
          {"co_contraction", r.co_contraction}};
}

BurstOptions burst_options(const RunConfig& cfg) { return {cfg.burst_ratio, cfg.burst_window, cfg.steady_window}; }

int cmd_calibrate(const Common& c, const std::string& model_path, int postures, long budget) {
  const RunConfig cfg = resolve_config(c);
  const ArmModel m = model_path.empty() ? default_model(cfg.variant) : load_model(model_path);
  const std::uint64_t seed = c.seed.value_or(0);
  Pcg32 rng = Pcg32::derive(seed, streams::kCalibration);
  CalibrationOptions opt;
  opt.postures = postures;
  opt.budget = budget;
  const CalibrationResult res = calibrate_tendon_slack(m, rng, opt);
  const fs::path out = c.out.empty() ? fs::path("models") : fs::path(c.out);
  fs::create_directories(out);
  const fs::path model_out = out / (to_string(m.variant) + "_calibrated.json");
  save_model(apply_slack(m, res.slack), model_out.string());
  Json muscles = Json::array();
  for (int i = 0; i < m.muscle_count(); ++i)
    muscles.push_back({{"name", m.muscles[i].muscle.name},
                       {"initial_slack_m", res.initial_slack[i]},
                       {"slack_m", res.slack[i]},
                       {"delta_m", res.slack[i] - res.initial_slack[i]}});
  Json report{{"variant", to_string(m.variant)},
              {"seed", seed},
              {"postures", postures},
              {"evaluations", res.evaluations},
              {"objective_before", res.objective_before},
              {"objective_after", res.objective_after},
              {"success", res.success},
              {"muscles", muscles}};
  if (!res.success) {
    Json worst = Json::array();
    for (const PostureResidual& r : res.residuals)
      worst.push_back({{"theta_deg", std::vector<double>(r.theta.begin(), r.theta.end())},
                       {"torque_nm", std::vector<double>(r.torque.begin(), r.torque.end())}});
    report["residuals"] = worst;
  }
  write_json(out / (to_string(m.variant) + "_calibration_report.json"), report);
  std::printf("J %.6g -> %.6g after %ld evaluations; wrote %s\n", res.objective_before, res.objective_after,
              res.evaluations, model_out.c_str());
  return res.success ? 0 : 2;
}

int cmd_train(const Common& c, std::optional<int> seeds, std::optional<int> episodes, bool resume) {
  RunConfig cfg = resolve_config(c);
  if (resume) cfg.resume = true;
  if (seeds) cfg.n_seeds = *seeds;
  if (episodes) cfg.train_episodes = *episodes;
  validate(cfg);
  const auto model = std::make_shared<const ArmModel>(resolve_model(cfg));
  if (!model->calibrated) std::fprintf(stderr, "warning: model tendon slack lengths are not calibrated\n");
  std::fprintf(stderr, "training %d seed(s) of %s, config %s -> %s\n", cfg.n_seeds, to_string(cfg.variant).c_str(),
               config_hash(cfg).c_str(), cfg.out_dir.c_str());
  const auto results = run_training(cfg, model, [](std::uint64_t seed, const CurvePoint& p) {
    std::fprintf(stderr, "seed %llu episode %d rmse %.2f deg return %.2f\n", static_cast<unsigned long long>(seed),
                 p.episode, p.rmse_deg, p.mean_return);
  });
  std::vector<double> finals;
  for (const SeedResult& r : results) {
    if (r.failed) {
      std::printf("seed %llu FAILED: %s\n", static_cast<unsigned long long>(r.seed), r.error.c_str());
    } else {
      std::printf("seed %llu final rmse %.2f deg%s\n", static_cast<unsigned long long>(r.seed), r.final_rmse_deg,
                  r.resumed ? " (resumed)" : "");
      finals.push_back(r.final_rmse_deg);
    }
  }
  const SeedStats s = seed_stats(finals);
  std::printf("final rmse %.2f +- %.2f deg (median %.2f) over %d seed(s)\n", s.mean, s.std, s.median, s.n);
  return s.n == static_cast<int>(results.size()) ? 0 : 2;
}

struct LoadedPolicy {
  Checkpoint checkpoint;
  std::optional<CheckpointInfo> info;
};

LoadedPolicy load_policy(const std::string& path, const RunConfig& cfg, const ArmModel& m) {
  LoadedPolicy p{load_checkpoint(path), std::nullopt};
  if (fs::exists(checkpoint_sidecar_path(path))) p.info = load_checkpoint_info(path);
  if (p.checkpoint.obs_dim != 3 * m.dof_count() || p.checkpoint.action_dim != make_env_config(cfg, m, 0).action_dim())
    throw InvalidInput("checkpoint does not fit the " + to_string(cfg.variant) + " arm (use --variant or --config)");
  if (p.info && p.info->config_hash != config_hash(cfg))
    std::fprintf(stderr, "note: checkpoint was trained with config %s, evaluating with %s\n", p.info->config_hash.c_str(),
                 config_hash(cfg).c_str());
  return p;
}

int cmd_eval(const Common& c, const std::string& checkpoint, int episodes, int logs) {
  const RunConfig cfg = resolve_config(c);
  const auto model = std::make_shared<const ArmModel>(resolve_model(cfg));
  const LoadedPolicy lp = load_policy(checkpoint, cfg, *model);
  const std::uint64_t seed = c.seed ? *c.seed : (lp.info ? lp.info->seed : cfg.seed_base);
  ReachingEnv env(model, make_env_config(cfg, *model, seed));
  env.reseed(evaluation_seed(seed));
  const fs::path out = c.out.empty() ? fs::path("eval") : fs::path(c.out);
  fs::create_directories(out);
  RmseAccumulator pooled;
  Json per_episode = Json::array();
  double returns = 0.0;
  for (int e = 0; e < episodes; ++e) {
    GreedyPolicy<double> policy = lp.checkpoint.policy();
    const EpisodeLog log = record_episode([&](const Observation& o) { return policy(o); }, env, env.reset());
    for (const EpisodeRow& r : log.rows) pooled.add(r.theta, r.target);
    returns += log.episode_return();
    per_episode.push_back(log.rmse_deg());
    if (e < logs) {
      char name[32];
      std::snprintf(name, sizeof name, "episode_%03d.csv", e);
      write_episode_csv(log, (out / name).string());
    }
  }
  write_json(out / "eval_summary.json", {{"checkpoint", checkpoint},
                                         {"seed", seed},
                                         {"config_hash", config_hash(cfg)},
                                         {"episodes", episodes},
                                         {"rmse_deg", pooled.rmse_deg()},
                                         {"mean_return", returns / episodes},
                                         {"episode_rmse_deg", per_episode}});
  std::printf("rmse %.2f deg, mean return %.3f over %d episodes\n", pooled.rmse_deg(), returns / episodes, episodes);
  return 0;
}

int cmd_track(const Common& c, const std::string& checkpoint, const std::string& trajectory) {
  const RunConfig cfg = resolve_config(c);
  const auto model = std::make_shared<const ArmModel>(resolve_model(cfg));
  const LoadedPolicy lp = load_policy(checkpoint, cfg, *model);
  const std::vector<DofVector> targets = load_trajectory(trajectory, model->dof_count());
  GreedyPolicy<double> policy = lp.checkpoint.policy();
  const EnvConfig ec = make_env_config(cfg, *model, 0);
  const EpisodeLog log =
      run_tracking([&](const Observation& o) { return policy(o); }, *model, ec, targets.front(), targets);
  const fs::path out = c.out.empty() ? fs::path("track") : fs::path(c.out);
  fs::create_directories(out);
  write_episode_csv(log, (out / "tracking.csv").string());
  // The arm starts at rest on the first target, so step 0 is not a change.
  std::vector<int> switches = target_switch_steps(log);
  std::erase(switches, 0);
  const BurstReport bursts = detect_bursts(log, switches, antagonist_pairs(cfg.variant), burst_options(cfg));
  write_json(out / "tracking_summary.json", {{"checkpoint", checkpoint},
                                             {"trajectory", trajectory},
                                             {"steps", log.rows.size()},
                                             {"rmse_deg", log.rmse_deg()},
                                             {"return", log.episode_return()},
                                             {"bursts", burst_json(bursts)}});
  std::printf("tracked %zu steps, rmse %.2f deg, bursts at %d of %d switches\n", log.rows.size(), log.rmse_deg(),
              bursts.flagged, bursts.evaluated);
  return 0;
}

int cmd_analyze(const Common& c, const std::string& log_path) {
  RunConfig cfg = resolve_config(c);
  std::ifstream in(log_path);
  if (!in) throw InvalidInput("cannot open '" + log_path + "'");
  const EpisodeLog log = read_episode_csv(in);
  const Variant v = log.dof_names.size() == 3 ? Variant::ThreeD : Variant::Planar;
  if (v != cfg.variant) {
    if (!cfg.model_path.empty()) throw InvalidInput("log and configured model have different DOF counts");
    cfg.variant = v;
  }
  const ArmModel m = cfg.model_path.empty() ? default_model(v) : load_model(cfg.model_path);
  const Json report{{"log", log_path},
                    {"steps", log.rows.size()},
                    {"rmse_deg", log.rmse_deg()},
                    {"hand_speed", speed_json(hand_speed_profile(log, m, cfg.prominence_fraction))},
                    {"bursts", burst_json(detect_bursts(log, target_switch_steps(log), antagonist_pairs(v),
                                                        burst_options(cfg)))}};
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    write_json(fs::path(c.out) / (fs::path(log_path).stem().string() + "_analysis.json"), report);
  }
  std::cout << report.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neuromechanical arm simulator and stimulation-policy trainer"};
  app.require_subcommand(1);

  Common common;
  std::string model_path, checkpoint, trajectory, log_path;
  int postures = 50, episodes = 50, logs = 5;
  long budget = 5000;
  std::optional<int> seeds, train_episodes;
  bool resume = false;

  auto* cal = app.add_subcommand("calibrate", "calibrate tendon slack lengths");
  add_common(cal, common);
  cal->add_option("--model", model_path, "model JSON (default: built-in model of --variant)");
  cal->add_option("--postures", postures, "sampled static postures")->check(CLI::Range(10, 100000));
  cal->add_option("--budget", budget, "objective evaluations")->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train", "train policies, one run per seed");
  add_common(train, common);
  train->add_option("--seeds", seeds, "number of seeds")->check(CLI::PositiveNumber);
  train->add_option("--episodes", train_episodes, "training episodes per seed")->check(CLI::PositiveNumber);
  train->add_flag("--resume", resume, "keep seeds already finished in --out with the same config");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the fixed evaluation episodes");
  add_common(eval, common);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--episodes", episodes, "episodes")->check(CLI::PositiveNumber);
  eval->add_option("--logs", logs, "episodes to write as CSV")->check(CLI::NonNegativeNumber);

  auto* track = app.add_subcommand("track", "follow a target trajectory with a checkpoint");
  add_common(track, common);
  track->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  track->add_option("--trajectory", trajectory, "trajectory CSV")->required()->check(CLI::ExistingFile);

  auto* analyze = app.add_subcommand("analyze", "hand speed and stimulation bursts of an episode log");
  add_common(analyze, common);
  analyze->add_option("--log", log_path, "episode CSV")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  try {
    if (cal->parsed()) return cmd_calibrate(common, model_path, postures, budget);
    if (train->parsed()) return cmd_train(common, seeds, train_episodes, resume);
    if (eval->parsed()) return cmd_eval(common, checkpoint, episodes, logs);
    if (track->parsed()) return cmd_track(common, checkpoint, trajectory);
    if (analyze->parsed()) return cmd_analyze(common, log_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
