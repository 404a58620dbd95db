#pragma once

#include <cstdio>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "fesarm/env.hpp"
#include "fesarm/errors.hpp"
#include "fesarm/simulator.hpp"

namespace fesarm {

/// One control step: angles after the step against the target it was
/// rewarded on, and the channel intensities applied during it.
struct EpisodeRow {
  int step = 0;
  double t_s = 0.0;        ///< time at the end of the step
  DofVector theta;         ///< [rad]
  DofVector theta_dot;     ///< [rad/s]
  DofVector target;        ///< [rad]
  Action channels;
  double reward = 0.0;
};

struct EpisodeLog {
  std::vector<std::string> dof_names;
  std::vector<std::string> channel_names;
  double dt = 0.1;
  DofVector initial_theta;  ///< posture before the first step
  std::vector<EpisodeRow> rows;

  double episode_return() const {
    double r = 0.0;
    for (const EpisodeRow& row : rows) r += row.reward;
    return r;
  }
  double rmse_deg() const {
    RmseAccumulator acc;
    for (const EpisodeRow& row : rows) acc.add(row.theta, row.target);
    return acc.rmse_deg();
  }
};

inline EpisodeLog empty_log(const ArmModel& m, const EnvConfig& c) {
  EpisodeLog log;
  for (const Dof& d : m.dofs) log.dof_names.push_back(d.name);
  for (const Channel& ch : c.channels) log.channel_names.push_back(ch.name);
  log.dt = c.dt_control;
  return log;
}

/// Runs one environment episode (already reset by `start`) and records it.
inline EpisodeLog record_episode(const Policy& policy, ReachingEnv& env, const Observation& start) {
  EpisodeLog log = empty_log(env.model(), env.config());
  log.initial_theta = start.theta;
  Observation obs = start;
  for (;;) {
    const DofVector target = env.target();
    const int k = env.step_index();
    const Transition t = env.step(policy(obs));
    log.rows.push_back({k, (k + 1) * env.config().dt_control, t.s_next.theta, t.s_next.theta_dot, target, t.a, t.r});
    obs = t.s_next;
    if (t.done) break;
  }
  return log;
}

/// Drives the arm from rest at `start` through per-step targets; the policy
/// sees target k before choosing the action of step k.
inline EpisodeLog run_tracking(const Policy& policy, const ArmModel& m, const EnvConfig& c, const DofVector& start,
                               const std::vector<DofVector>& targets) {
  if (start.size() != m.dof_count()) throw InvalidInput("tracking: start posture has the wrong dimension");
  for (const DofVector& t : targets)
    if (t.size() != m.dof_count())
      throw InvalidInput("tracking: trajectory has " + std::to_string(t.size()) + " DOFs, model has " +
                         std::to_string(m.dof_count()));
  Simulator sim(m);
  SimState s = SimState::rest(m, start);
  EpisodeLog log = empty_log(m, c);
  log.initial_theta = start;
  for (int k = 0; k < static_cast<int>(targets.size()); ++k) {
    const Action a = policy({s.q.theta, s.q.theta_dot, targets[k]});
    s = sim.step(std::move(s), map_channels(c, a, m.muscle_count()), c.dt_control);
    log.rows.push_back({k, (k + 1) * c.dt_control, s.q.theta, s.q.theta_dot, targets[k], a,
                        reward(s.q.theta, targets[k], a, c)});
  }
  return log;
}

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

/// Columns: step, t_s, theta_<dof>_deg, theta_dot_<dof>_deg_s, target_<dof>_deg,
/// channel_<name>, reward.
inline void write_episode_csv(const EpisodeLog& log, std::ostream& out) {
  out << "step,t_s";
  for (const auto& n : log.dof_names) out << ",theta_" << n << "_deg";
  for (const auto& n : log.dof_names) out << ",theta_dot_" << n << "_deg_s";
  for (const auto& n : log.dof_names) out << ",target_" << n << "_deg";
  for (const auto& n : log.channel_names) out << ",channel_" << n;
  out << ",reward\n";
  for (const EpisodeRow& r : log.rows) {
    out << r.step << ',' << format_number(r.t_s);
    for (int d = 0; d < r.theta.size(); ++d) out << ',' << format_number(to_deg(r.theta[d]));
    for (int d = 0; d < r.theta_dot.size(); ++d) out << ',' << format_number(to_deg(r.theta_dot[d]));
    for (int d = 0; d < r.target.size(); ++d) out << ',' << format_number(to_deg(r.target[d]));
    for (int i = 0; i < r.channels.size(); ++i) out << ',' << format_number(r.channels[i]);
    out << ',' << format_number(r.reward) << '\n';
  }
}

inline void write_episode_csv(const EpisodeLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write '" + path + "'");
  write_episode_csv(log, out);
}

namespace detail {

inline std::vector<std::string> split_csv_line(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> cells;
  std::stringstream ss(line);
  for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
  return cells;
}

inline double parse_cell(const std::string& cell, std::size_t row) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used == cell.size()) return v;
  } catch (const std::exception&) {
  }
  throw InvalidInput("row " + std::to_string(row) + ": bad number '" + cell + "'");
}

}  // namespace detail

/// Reads a log written by write_episode_csv. The posture before the first
/// step is not stored, so initial_theta is left empty.
inline EpisodeLog read_episode_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("episode log is empty");
  const std::vector<std::string> head = detail::split_csv_line(line);
  EpisodeLog log;
  const auto strip = [](const std::string& s, const std::string& pre, const std::string& post) {
    return s.substr(pre.size(), s.size() - pre.size() - post.size());
  };
  const auto has = [](const std::string& s, const std::string& pre, const std::string& post) {
    return s.size() > pre.size() + post.size() && s.rfind(pre, 0) == 0 && s.compare(s.size() - post.size(), post.size(), post) == 0;
  };
  std::size_t i = 2;
  if (head.size() < 3 || head[0] != "step" || head[1] != "t_s" || head.back() != "reward")
    throw InvalidInput("not an episode log header");
  while (i < head.size() && has(head[i], "theta_", "_deg") && !has(head[i], "theta_dot_", "_deg_s"))
    log.dof_names.push_back(strip(head[i++], "theta_", "_deg"));
  const std::size_t n = log.dof_names.size();
  for (std::size_t d = 0; d < n; ++d, ++i)
    if (i >= head.size() || head[i] != "theta_dot_" + log.dof_names[d] + "_deg_s") throw InvalidInput("episode log: bad velocity columns");
  for (std::size_t d = 0; d < n; ++d, ++i)
    if (i >= head.size() || head[i] != "target_" + log.dof_names[d] + "_deg") throw InvalidInput("episode log: bad target columns");
  for (; i + 1 < head.size(); ++i) {
    if (head[i].rfind("channel_", 0) != 0) throw InvalidInput("episode log: unexpected column '" + head[i] + "'");
    log.channel_names.push_back(head[i].substr(8));
  }
  if (n == 0 || log.channel_names.empty()) throw InvalidInput("episode log needs angle and channel columns");
  const std::size_t nc = log.channel_names.size();
  while (std::getline(in, line)) {
    const std::vector<std::string> cells = detail::split_csv_line(line);
    if (cells.empty()) continue;
    const std::size_t row = log.rows.size();
    if (cells.size() != head.size()) throw InvalidInput("episode log row " + std::to_string(row) + ": wrong column count");
    std::vector<double> v;
    for (const std::string& c : cells) v.push_back(detail::parse_cell(c, row));
    EpisodeRow r;
    r.step = static_cast<int>(v[0]);
    r.t_s = v[1];
    r.theta.resize(n);
    r.theta_dot.resize(n);
    r.target.resize(n);
    for (std::size_t d = 0; d < n; ++d) {
      r.theta[d] = deg(v[2 + d]);
      r.theta_dot[d] = deg(v[2 + n + d]);
      r.target[d] = deg(v[2 + 2 * n + d]);
    }
    r.channels.resize(nc);
    for (std::size_t c = 0; c < nc; ++c) r.channels[c] = v[2 + 3 * n + c];
    r.reward = v.back();
    log.rows.push_back(r);
  }
  if (log.rows.size() >= 2) log.dt = log.rows[1].t_s - log.rows[0].t_s;
  return log;
}

/// Per-step targets from CSV with header `step,target_dof0_deg,...`; steps
/// must run 0, 1, 2, ... Returns radians.
inline std::vector<DofVector> parse_trajectory_csv(std::istream& in, int dofs) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("trajectory file is empty");
  std::string expected = "step";
  for (int d = 0; d < dofs; ++d) expected += ",target_dof" + std::to_string(d) + "_deg";
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected) throw InvalidInput("trajectory header '" + line + "' does not match '" + expected + "'");
  std::vector<DofVector> out;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw InvalidInput("trajectory row " + std::to_string(out.size()) + ": bad number '" + cell + "'");
      }
    }
    if (static_cast<int>(v.size()) != dofs + 1)
      throw InvalidInput("trajectory row " + std::to_string(out.size()) + " has " + std::to_string(v.size()) +
                         " columns, expected " + std::to_string(dofs + 1));
    if (v[0] != static_cast<double>(out.size())) throw InvalidInput("trajectory steps must count up from 0");
    DofVector t(dofs);
    for (int d = 0; d < dofs; ++d) t[d] = deg(v[d + 1]);
    out.push_back(t);
  }
  if (out.empty()) throw InvalidInput("trajectory has no rows");
  return out;
}

inline std::vector<DofVector> load_trajectory(const std::string& path, int dofs) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open trajectory '" + path + "'");
  return parse_trajectory_csv(in, dofs);
}

inline void write_trajectory_csv(const std::vector<DofVector>& targets, std::ostream& out) {
  if (targets.empty()) return;
  out << "step";
  for (int d = 0; d < targets[0].size(); ++d) out << ",target_dof" << d << "_deg";
  out << '\n';
  for (std::size_t k = 0; k < targets.size(); ++k) {
    out << k;
    for (int d = 0; d < targets[k].size(); ++d) out << ',' << format_number(to_deg(targets[k][d]));
    out << '\n';
  }
}

}  // namespace fesarm
