#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fesarm/checkpoint.hpp"
#include "fesarm/env.hpp"
#include "fesarm/episode_log.hpp"
#include "fesarm/run_config.hpp"
#include "fesarm/sac.hpp"

namespace fesarm {

struct CurvePoint {
  int episode = 0;
  double rmse_deg = 0.0;
  double mean_return = 0.0;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<CurvePoint> curve;
  bool failed = false;
  std::string error;
  double final_rmse_deg = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
  bool resumed = false;  ///< loaded from an earlier run's files instead of trained
};

/// Seed of the fixed evaluation episode set: every evaluation of one training
/// run replays the same episodes.
inline std::uint64_t evaluation_seed(std::uint64_t run_seed) {
  Pcg32 r = Pcg32::derive(run_seed, streams::kEvaluation);
  return (static_cast<std::uint64_t>(r.next_u32()) << 32) | r.next_u32();
}

using TrainingAgent = SacAgent<float>;

/// Deterministic evaluation of a greedy policy on the fixed episode set.
template <class S>
RmseReport evaluate_policy_on_set(GreedyPolicy<S> policy, ReachingEnv& env, std::uint64_t run_seed, int episodes) {
  env.reseed(evaluation_seed(run_seed));
  return evaluate_rmse([&](const Observation& o) { return policy(o); }, env, episodes, [&] { policy.reset(); });
}

/// One training run: interleaves training episodes with evaluations on the
/// fixed set. Divergence or non-finite losses mark the run failed.
/// `agent_out` (optional) receives the final agent.
inline SeedResult train_seed(const RunConfig& cfg, std::shared_ptr<const ArmModel> model, std::uint64_t seed,
                             std::unique_ptr<TrainingAgent>* agent_out = nullptr,
                             const std::function<void(const CurvePoint&)>& progress = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  SeedResult res;
  res.seed = seed;
  try {
    const EnvConfig ec = make_env_config(cfg, *model, seed);
    ReachingEnv env(model, ec);
    ReachingEnv eval_env(model, ec);
    auto agent = std::make_unique<TrainingAgent>(ec.observation_dim(), ec.action_dim(), cfg.sac, seed, cfg.encoder);
    for (int ep = 1; ep <= cfg.train_episodes; ++ep) {
      Observation o = env.reset();
      agent->begin_episode();
      for (;;) {
        const Transition t = env.step(agent->explore(o));
        agent->observe(t);
        o = t.s_next;
        if (t.done) break;
      }
      if (ep % cfg.eval_every == 0) {
        const RmseReport rep = evaluate_policy_on_set(agent->greedy(), eval_env, seed, cfg.eval_episodes);
        res.curve.push_back({ep, rep.rmse_deg, rep.mean_return});
        if (progress) progress(res.curve.back());
      }
    }
    if (!res.curve.empty()) res.final_rmse_deg = res.curve.back().rmse_deg;
    if (agent_out) *agent_out = std::move(agent);
  } catch (const SimulationDiverged& e) {
    res.failed = true;
    res.error = std::string("simulation diverged: ") + e.what();
  } catch (const NumericalError& e) {
    res.failed = true;
    res.error = std::string("numerical error: ") + e.what();
  } catch (const std::exception& e) {
    res.failed = true;
    res.error = e.what();
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

/// First evaluated episode from which every later point stays within `band`
/// degrees of the final value.
inline int episodes_to_band(const std::vector<CurvePoint>& curve, double band) {
  if (curve.empty()) return 0;
  const double final = curve.back().rmse_deg;
  int first = curve.back().episode;
  for (int i = static_cast<int>(curve.size()) - 1; i >= 0; --i) {
    if (std::abs(curve[i].rmse_deg - final) > band) break;
    first = curve[i].episode;
  }
  return first;
}

struct SeedStats {
  int n = 0;
  double mean = 0.0;
  double std = 0.0;  ///< population standard deviation
  double median = 0.0;
};

inline SeedStats seed_stats(std::vector<double> v) {
  SeedStats s;
  s.n = static_cast<int>(v.size());
  if (v.empty()) return s;
  // Shifted by the first value so that identical inputs give exactly zero spread.
  double shift = 0.0;
  for (double x : v) shift += (x - v[0]) / s.n;
  double var = 0.0;
  for (double x : v) var += (x - v[0] - shift) * (x - v[0] - shift) / s.n;
  s.mean = v[0] + shift;
  s.std = std::sqrt(var);
  std::sort(v.begin(), v.end());
  s.median = s.n % 2 ? v[s.n / 2] : 0.5 * (v[s.n / 2 - 1] + v[s.n / 2]);
  return s;
}

inline void write_curve_csv(const std::vector<SeedResult>& results, std::ostream& out) {
  out << "episode,seed,rmse_deg,mean_return\n";
  for (const SeedResult& r : results)
    for (const CurvePoint& p : r.curve)
      out << p.episode << ',' << r.seed << ',' << format_number(p.rmse_deg) << ',' << format_number(p.mean_return)
          << '\n';
}

/// Mean and population standard deviation across the non-failed seeds.
inline void write_aggregate_csv(const std::vector<SeedResult>& results, std::ostream& out) {
  std::map<int, std::vector<double>> by_episode;
  for (const SeedResult& r : results)
    if (!r.failed)
      for (const CurvePoint& p : r.curve) by_episode[p.episode].push_back(p.rmse_deg);
  out << "episode,mean_rmse_deg,std_rmse_deg,seeds\n";
  for (const auto& [ep, v] : by_episode) {
    const SeedStats s = seed_stats(v);
    out << ep << ',' << format_number(s.mean) << ',' << format_number(s.std) << ',' << s.n << '\n';
  }
}

inline nlohmann::ordered_json summary_json(const RunConfig& cfg, const std::vector<SeedResult>& results,
                                           double wall_seconds) {
  nlohmann::ordered_json j;
  j["config_hash"] = config_hash(cfg);
  j["variant"] = to_string(cfg.variant);
  std::vector<double> finals;
  nlohmann::ordered_json seeds = nlohmann::ordered_json::array();
  for (const SeedResult& r : results) {
    nlohmann::ordered_json s;
    s["seed"] = r.seed;
    s["failed"] = r.failed;
    if (r.failed) {
      s["error"] = r.error;
    } else {
      s["final_rmse_deg"] = r.final_rmse_deg;
      s["episodes_to_final_band"] = episodes_to_band(r.curve, 2.0);
      finals.push_back(r.final_rmse_deg);
    }
    s["seconds"] = r.seconds;
    if (r.resumed) s["resumed"] = true;
    seeds.push_back(s);
  }
  const SeedStats st = seed_stats(finals);
  j["seeds"] = seeds;
  j["completed_seeds"] = st.n;
  j["failed_seeds"] = static_cast<int>(results.size()) - st.n;
  j["final_rmse_deg"] = {{"mean", st.mean}, {"std", st.std}, {"median", st.median}};
  j["wall_clock_s"] = wall_seconds;
  return j;
}

inline std::string seed_tag(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

/// Reads the curve of one seed from a file written by write_curve_csv.
inline std::vector<CurvePoint> read_curve_csv(std::istream& in, std::uint64_t seed) {
  std::string line;
  if (!std::getline(in, line) || detail::split_csv_line(line) != std::vector<std::string>{"episode", "seed", "rmse_deg", "mean_return"})
    throw InvalidInput("not a learning-curve file");
  std::vector<CurvePoint> curve;
  while (std::getline(in, line)) {
    const auto cells = detail::split_csv_line(line);
    if (cells.empty()) continue;
    if (cells.size() != 4) throw InvalidInput("learning curve row " + std::to_string(curve.size()) + ": wrong column count");
    if (static_cast<std::uint64_t>(detail::parse_cell(cells[1], curve.size())) != seed) continue;
    curve.push_back({static_cast<int>(detail::parse_cell(cells[0], curve.size())), detail::parse_cell(cells[2], curve.size()),
                     detail::parse_cell(cells[3], curve.size())});
  }
  return curve;
}

/// A seed finished by an earlier run with the same config hash, if its curve
/// and checkpoint are both on disk. Curve values carry the CSV's six decimals.
inline std::optional<SeedResult> load_finished_seed(const std::filesystem::path& dir, std::uint64_t seed,
                                                    const std::string& hash, int train_episodes) {
  const auto ckpt = dir / (seed_tag(seed) + ".ckpt");
  const auto curve_path = dir / (seed_tag(seed) + "_curve.csv");
  if (!std::filesystem::exists(ckpt) || !std::filesystem::exists(checkpoint_sidecar_path(ckpt.string())) ||
      !std::filesystem::exists(curve_path))
    return std::nullopt;
  try {
    if (load_checkpoint_info(ckpt.string()).config_hash != hash) return std::nullopt;
    std::ifstream in(curve_path);
    SeedResult r;
    r.seed = seed;
    r.curve = read_curve_csv(in, seed);
    if (r.curve.empty() || r.curve.back().episode != train_episodes) return std::nullopt;
    r.final_rmse_deg = r.curve.back().rmse_deg;
    r.resumed = true;
    return r;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

/// Trains cfg.n_seeds independent runs on up to cfg.jobs threads. Each worker
/// writes only its own files (per-seed curve CSV, checkpoint); the merged
/// learning curve, aggregate and summary are written after all finish.
inline std::vector<SeedResult> run_training(const RunConfig& cfg, std::shared_ptr<const ArmModel> model,
                                            const std::function<void(std::uint64_t, const CurvePoint&)>& progress = {}) {
  validate(cfg);
  namespace fs = std::filesystem;
  const fs::path out(cfg.out_dir);
  fs::create_directories(out);
  const auto t0 = std::chrono::steady_clock::now();
  const std::string hash = config_hash(cfg);
  std::vector<SeedResult> results(cfg.n_seeds);
  std::atomic<int> next{0};
  std::mutex progress_mutex;
  const auto worker = [&] {
    for (int i = next++; i < cfg.n_seeds; i = next++) {
      const std::uint64_t seed = cfg.seed_base + static_cast<std::uint64_t>(i);
      if (cfg.resume) {
        if (auto done = load_finished_seed(out, seed, hash, cfg.train_episodes)) {
          results[i] = std::move(*done);
          continue;
        }
      }
      std::unique_ptr<TrainingAgent> agent;
      results[i] = train_seed(cfg, model, seed, &agent, [&](const CurvePoint& p) {
        if (!progress) return;
        std::lock_guard lock(progress_mutex);
        progress(seed, p);
      });
      std::ofstream curve(out / (seed_tag(seed) + "_curve.csv"));
      write_curve_csv({results[i]}, curve);
      if (agent) {
        const CheckpointInfo info{hash, agent->env_steps(), agent->updates(), cfg.train_episodes, seed,
                                  to_string(cfg.variant)};
        save_checkpoint((out / (seed_tag(seed) + ".ckpt")).string(), make_checkpoint(*agent), info);
      }
    }
  };
  const int threads = std::min(cfg.jobs, cfg.n_seeds);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ofstream curve(out / "learning_curve.csv");
  write_curve_csv(results, curve);
  std::ofstream agg(out / "learning_curve_aggregate.csv");
  write_aggregate_csv(results, agg);
  std::ofstream summary(out / "summary.json");
  summary << summary_json(cfg, results, wall).dump(2) << '\n';
  std::ofstream config(out / "run_config.json");
  config << to_json(cfg).dump(2) << '\n';
  return results;
}

}  // namespace fesarm
