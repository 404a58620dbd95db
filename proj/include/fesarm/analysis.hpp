#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "fesarm/episode_log.hpp"
#include "fesarm/errors.hpp"
#include "fesarm/kinematics.hpp"

namespace fesarm {

struct SpeedProfile {
  std::vector<double> speed;     ///< [m/s], sample k spans steps k..k+1
  std::vector<double> smoothed;  ///< 5-sample centred moving average
  int local_maxima = 0;          ///< interior maxima of the smoothed curve
  int dominant_maxima = 0;       ///< those with prominence >= fraction of the peak
  double peak_speed = 0.0;
  double time_to_peak_fraction = 0.0;
  double normalized_jerk = 0.0;  ///< integral of |jerk|^2 times duration^5 / path length^2 (720 for minimum jerk)
};

namespace detail {

inline std::vector<double> moving_average(const std::vector<double>& x, int width) {
  const int n = static_cast<int>(x.size());
  const int half = width / 2;
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half);
    const int hi = std::min(n - 1, i + half);
    double s = 0.0;
    for (int k = lo; k <= hi; ++k) s += x[k];
    y[i] = s / (hi - lo + 1);
  }
  return y;
}

// Topographic prominence of the maximum at i: height above the higher of the
// two minima reached before meeting a higher sample (or the curve's end).
inline double prominence(const std::vector<double>& s, int i) {
  const int n = static_cast<int>(s.size());
  double left = s[i];
  for (int k = i - 1; k >= 0 && s[k] <= s[i]; --k) left = std::min(left, s[k]);
  double right = s[i];
  for (int k = i + 1; k < n && s[k] <= s[i]; ++k) right = std::min(right, s[k]);
  return s[i] - std::max(left, right);
}

}  // namespace detail

/// Speed metrics of a sampled path. A plateau counts as one maximum.
inline SpeedProfile speed_profile(const std::vector<Vec3d>& positions, double dt, double prominence_fraction = 0.2) {
  if (positions.size() < 4) throw InvalidInput("speed profile needs at least 3 steps");
  if (!(dt > 0)) throw InvalidInput("speed profile: dt must be positive");
  SpeedProfile p;
  const int n = static_cast<int>(positions.size()) - 1;
  double path = 0.0;
  for (int k = 0; k < n; ++k) {
    const double d = norm(positions[k + 1] - positions[k]);
    path += d;
    p.speed.push_back(d / dt);
  }
  p.smoothed = detail::moving_average(p.speed, 5);
  const auto& s = p.smoothed;
  const auto peak = std::max_element(s.begin(), s.end());
  p.peak_speed = *peak;
  const int ipeak = static_cast<int>(peak - s.begin());
  p.time_to_peak_fraction = (ipeak + 0.5) / n;
  const double floor = 1e-9;
  if (p.peak_speed > floor) {
    for (int i = 1; i + 1 < n; ++i) {
      if (!(s[i] > s[i - 1])) continue;
      int j = i;
      while (j + 1 < n && s[j + 1] == s[i]) ++j;  // plateau
      if (j + 1 < n && s[j + 1] < s[i]) {
        ++p.local_maxima;
        if (detail::prominence(s, i) >= prominence_fraction * p.peak_speed) ++p.dominant_maxima;
      }
      i = j;
    }
  }
  if (path > floor) {
    double jerk2 = 0.0;
    for (int k = 0; k + 3 <= n; ++k) {
      const Vec3d j = (1.0 / (dt * dt * dt)) *
                      (positions[k + 3] - 3.0 * positions[k + 2] + 3.0 * positions[k + 1] - positions[k]);
      jerk2 += dot(j, j) * dt;
    }
    const double duration = n * dt;
    p.normalized_jerk = jerk2 * std::pow(duration, 5) / (path * path);
  }
  return p;
}

/// Hand speed along a logged movement, starting from the log's initial posture.
inline SpeedProfile hand_speed_profile(const EpisodeLog& log, const ArmModel& m, double prominence_fraction = 0.2) {
  if (log.rows.size() < 3) throw InvalidInput("hand speed profile needs at least 3 steps");
  std::vector<Vec3d> pos;
  pos.push_back(hand_position(m, log.initial_theta.size() > 0 ? log.initial_theta : log.rows.front().theta));
  for (const EpisodeRow& r : log.rows) pos.push_back(hand_position(m, r.theta));
  return speed_profile(pos, log.dt, prominence_fraction);
}

struct BurstOptions {
  double ratio = 1.5;
  int burst_window = 5;
  int steady_window = 10;
};

struct SwitchBurst {
  int step = 0;
  bool evaluated = false;
  std::string note;
  double post_mean = 0.0;    ///< mean total intensity over the burst window after the switch
  double steady_mean = 0.0;  ///< mean total intensity over the steady window before the next switch
  double ratio = 0.0;
  bool burst = false;
  std::vector<double> co_contraction;  ///< per antagonist pair: min of the two channels' steady means
};

struct BurstReport {
  std::vector<SwitchBurst> switches;
  int evaluated = 0;
  int flagged = 0;
  std::vector<double> co_contraction;  ///< per pair, averaged over evaluated switches

  double flagged_fraction() const { return evaluated == 0 ? 0.0 : static_cast<double>(flagged) / evaluated; }
};

/// Steps at which the logged target changes (the first step included).
inline std::vector<int> target_switch_steps(const EpisodeLog& log) {
  std::vector<int> s;
  for (std::size_t k = 0; k < log.rows.size(); ++k)
    if (k == 0 || log.rows[k].target != log.rows[k - 1].target) s.push_back(static_cast<int>(k));
  return s;
}

/// Compares stimulation right after each switch with the steady level before
/// the next one. Switches whose windows do not fit are skipped with a note.
inline BurstReport detect_bursts(const EpisodeLog& log, const std::vector<int>& switch_steps,
                                 const std::vector<std::pair<int, int>>& antagonists, const BurstOptions& opt = {}) {
  BurstReport rep;
  const int n = static_cast<int>(log.rows.size());
  const int channels = log.rows.empty() ? 0 : static_cast<int>(log.rows.front().channels.size());
  for (const auto& [a, b] : antagonists)
    if (a < 0 || b < 0 || a >= channels || b >= channels) throw InvalidInput("antagonist pair outside channel range");
  rep.co_contraction.assign(antagonists.size(), 0.0);
  std::vector<int> sorted = switch_steps;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    SwitchBurst sb;
    sb.step = sorted[i];
    const int next = i + 1 < sorted.size() ? sorted[i + 1] : n;
    const int post_end = sb.step + opt.burst_window;
    const int steady_begin = next - opt.steady_window;
    if (sb.step < 0 || next > n) {
      sb.note = "switch outside the log";
    } else if (post_end > steady_begin) {
      sb.note = "segment too short for burst and steady windows";
    } else {
      sb.evaluated = true;
      for (int k = sb.step; k < post_end; ++k) sb.post_mean += log.rows[k].channels.sum();
      sb.post_mean /= opt.burst_window;
      std::vector<double> channel_mean(channels, 0.0);
      for (int k = steady_begin; k < next; ++k) {
        sb.steady_mean += log.rows[k].channels.sum();
        for (int c = 0; c < channels; ++c) channel_mean[c] += log.rows[k].channels[c] / opt.steady_window;
      }
      sb.steady_mean /= opt.steady_window;
      sb.ratio = sb.steady_mean > 0 ? sb.post_mean / sb.steady_mean
                                    : (sb.post_mean > 0 ? std::numeric_limits<double>::infinity() : 1.0);
      sb.burst = sb.ratio > opt.ratio;
      for (const auto& [a, b] : antagonists) sb.co_contraction.push_back(std::min(channel_mean[a], channel_mean[b]));
      ++rep.evaluated;
      if (sb.burst) ++rep.flagged;
      for (std::size_t p = 0; p < antagonists.size(); ++p) rep.co_contraction[p] += sb.co_contraction[p];
    }
    rep.switches.push_back(std::move(sb));
  }
  if (rep.evaluated > 0)
    for (double& c : rep.co_contraction) c /= rep.evaluated;
  return rep;
}

}  // namespace fesarm
