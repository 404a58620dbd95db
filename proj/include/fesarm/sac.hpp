#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "fesarm/env.hpp"
#include "fesarm/errors.hpp"
#include "fesarm/mlp.hpp"
#include "fesarm/rng.hpp"

namespace fesarm {

struct SacConfig {
  int hidden = 128;
  double lr_actor = 3e-4;
  double lr_critic = 3e-4;
  double lr_alpha = 3e-4;
  double gamma = 0.8;  ///< below the usual 0.99, which learned markedly slower on this task
  double tau = 0.005;
  int batch_size = 256;
  int buffer_capacity = 100000;
  int warmup_steps = 1000;
  int updates_per_step = 1;
  double init_alpha = 1.0;
  double log_std_min = -20.0;
  double log_std_max = 2.0;
  double target_entropy_per_dim = -1.0;  ///< target entropy = value * action_dim
};

/// Network input built from an observation [theta, theta_dot, theta_target]:
/// angles as is, velocities scaled, optionally followed by the tracking error
/// theta_target - theta and by the agent's own previous action. Muscle
/// activation lags stimulation by about one control period, so the previous
/// action carries most of the state the observation leaves out. The
/// environment contract is unchanged.
struct ObservationEncoder {
  double velocity_scale = 0.1;
  bool append_error = true;
  bool append_previous_action = false;

  int input_dim(int obs_dim, int action_dim) const {
    return obs_dim + (append_error ? obs_dim / 3 : 0) + (append_previous_action ? action_dim : 0);
  }
  Eigen::VectorXd encode(const Eigen::VectorXd& obs, const Eigen::VectorXd& previous_action) const {
    const Eigen::Index n = obs.size() / 3;
    const Eigen::Index na = append_previous_action ? previous_action.size() : 0;
    Eigen::VectorXd x(obs.size() + (append_error ? n : 0) + na);
    x.head(n) = obs.head(n);
    x.segment(n, n) = velocity_scale * obs.segment(n, n);
    x.segment(2 * n, n) = obs.segment(2 * n, n);
    if (append_error) x.segment(3 * n, n) = obs.segment(2 * n, n) - obs.head(n);
    if (na > 0) x.tail(na) = previous_action;
    return x;
  }
  Eigen::VectorXd encode(const Observation& o, const Eigen::VectorXd& previous_action) const {
    return encode(o.flat(), previous_action);
  }
};

template <class S>
using MatrixX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using VectorX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using RowVectorX = Eigen::Matrix<S, 1, Eigen::Dynamic>;

namespace detail {
template <class S>
S softplus(S x) {
  return x > S(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}
template <class S>
S sigmoid(S x) {
  return x >= S(0) ? S(1) / (S(1) + std::exp(-x)) : std::exp(x) / (S(1) + std::exp(x));
}
}  // namespace detail

/// Sigmoid-squashed diagonal Gaussian policy evaluated on a batch.
///
/// The actor emits [mean; log_std] per action dimension. With u = mean +
/// exp(log_std) * eps and a = sigmoid(u):
///   log pi(a) = sum_i [ log N(u_i; mean_i, std_i) - log(a_i (1 - a_i)) ]
/// where log(a (1 - a)) = -softplus(u) - softplus(-u) is evaluated from u so
/// the correction never sees a saturated action.
template <class S>
struct PolicySample {
  MatrixX<S> mean;
  MatrixX<S> log_std;
  MatrixX<S> std;
  MatrixX<S> eps;
  MatrixX<S> u;
  MatrixX<S> a;
  RowVectorX<S> log_prob;
  MatrixX<S> clamp_mask;  ///< 1 where log_std was inside its clamp range
  typename Mlp<S>::Cache cache;
};

template <class S>
PolicySample<S> evaluate_policy(const Mlp<S>& actor, const MatrixX<S>& obs, const MatrixX<S>& eps,
                                const SacConfig& cfg) {
  PolicySample<S> p;
  const MatrixX<S> raw = actor.forward(obs, &p.cache);
  const int n = actor.output_dim() / 2;
  if (eps.rows() != n || eps.cols() != obs.cols()) throw InvalidInput("policy noise has wrong shape");
  p.mean = raw.topRows(n);
  const MatrixX<S> ls_raw = raw.bottomRows(n);
  p.log_std = ls_raw.cwiseMax(S(cfg.log_std_min)).cwiseMin(S(cfg.log_std_max));
  p.clamp_mask = ((ls_raw.array() >= S(cfg.log_std_min)) && (ls_raw.array() <= S(cfg.log_std_max))).template cast<S>();
  p.std = p.log_std.array().exp();
  p.eps = eps;
  p.u = p.mean + p.std.cwiseProduct(eps);
  p.a.resize(n, obs.cols());
  p.log_prob = RowVectorX<S>::Zero(obs.cols());
  const S half_log_2pi = S(0.5 * std::log(2.0 * std::numbers::pi));
  for (Eigen::Index j = 0; j < obs.cols(); ++j)
    for (int i = 0; i < n; ++i) {
      const S u = p.u(i, j);
      p.a(i, j) = detail::sigmoid(u);
      p.log_prob[j] += -S(0.5) * eps(i, j) * eps(i, j) - p.log_std(i, j) - half_log_2pi + detail::softplus(u) +
                       detail::softplus(-u);
    }
  return p;
}

/// Log-density of the squashed policy at a given pre-squash value u.
inline double squashed_log_prob(double u, double mean, double log_std) {
  const double z = (u - mean) / std::exp(log_std);
  return -0.5 * z * z - log_std - 0.5 * std::log(2.0 * std::numbers::pi) + detail::softplus(u) + detail::softplus(-u);
}

template <class S>
struct AgentNets {
  Mlp<S> actor;
  Mlp<S> critic1;
  Mlp<S> critic2;
  Mlp<S> target1;
  Mlp<S> target2;
  double log_alpha = 0.0;

  int obs_dim() const { return actor.input_dim(); }
  int action_dim() const { return actor.output_dim() / 2; }
  double alpha() const { return std::exp(log_alpha); }

  static AgentNets create(int obs_dim, int action_dim, const SacConfig& cfg, Pcg32& rng) {
    if (obs_dim <= 0 || action_dim <= 0) throw InvalidInput("agent dimensions must be positive");
    AgentNets n;
    n.actor = Mlp<S>({obs_dim, cfg.hidden, cfg.hidden, 2 * action_dim});
    n.critic1 = Mlp<S>({obs_dim + action_dim, cfg.hidden, cfg.hidden, 1});
    n.critic2 = n.critic1;
    n.actor.init(rng);
    n.critic1.init(rng);
    n.critic2.init(rng);
    n.target1 = n.critic1;
    n.target2 = n.critic2;
    n.log_alpha = std::log(cfg.init_alpha);
    return n;
  }
};

template <class S>
MatrixX<S> stack(const MatrixX<S>& s, const MatrixX<S>& a) {
  MatrixX<S> x(s.rows() + a.rows(), s.cols());
  x << s, a;
  return x;
}

template <class S>
struct Batch {
  MatrixX<S> s;
  MatrixX<S> a;
  RowVectorX<S> r;
  MatrixX<S> s_next;
  RowVectorX<S> done;

  Eigen::Index size() const { return s.cols(); }
};

/// Fixed-capacity ring of transitions with uniform sampling with replacement.
template <class S>
class ReplayBuffer {
public:
  ReplayBuffer(int capacity, int obs_dim, int action_dim)
      : capacity_(capacity), s_(obs_dim, capacity), a_(action_dim, capacity), r_(capacity), s2_(obs_dim, capacity),
        done_(capacity) {
    if (capacity <= 0) throw InvalidInput("replay capacity must be positive");
  }

  int size() const { return size_; }
  int capacity() const { return capacity_; }

  void push(const Eigen::VectorXd& s, const Eigen::VectorXd& a, double r, const Eigen::VectorXd& s_next, bool done) {
    if (s.size() != s_.rows() || s_next.size() != s_.rows() || a.size() != a_.rows())
      throw InvalidInput("replay push: dimension mismatch");
    s_.col(head_) = s.cast<S>();
    a_.col(head_) = a.cast<S>();
    r_[head_] = static_cast<S>(r);
    s2_.col(head_) = s_next.cast<S>();
    done_[head_] = done ? S(1) : S(0);
    head_ = (head_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);
  }
  void push(const Transition& t) { push(t.s.flat(), t.a, t.r, t.s_next.flat(), t.done); }

  /// Stored item `i` counted from the oldest.
  int slot(int i) const { return (head_ - size_ + i + capacity_) % capacity_; }
  double reward_at(int i) const { return r_[slot(i)]; }

  Batch<S> sample(int k, Pcg32& rng) const {
    if (size_ == 0) throw InvalidInput("cannot sample from an empty replay buffer");
    if (k <= 0) throw InvalidInput("batch size must be positive");
    Batch<S> b;
    b.s.resize(s_.rows(), k);
    b.a.resize(a_.rows(), k);
    b.r.resize(k);
    b.s_next.resize(s_.rows(), k);
    b.done.resize(k);
    for (int j = 0; j < k; ++j) {
      const int i = slot(static_cast<int>(rng.below(static_cast<std::uint32_t>(size_))));
      b.s.col(j) = s_.col(i);
      b.a.col(j) = a_.col(i);
      b.r[j] = r_[i];
      b.s_next.col(j) = s2_.col(i);
      b.done[j] = done_[i];
    }
    return b;
  }

private:
  int capacity_;
  int head_ = 0;
  int size_ = 0;
  MatrixX<S> s_;
  MatrixX<S> a_;
  VectorX<S> r_;
  MatrixX<S> s2_;
  VectorX<S> done_;
};

template <class S>
MatrixX<S> standard_normal(Eigen::Index rows, Eigen::Index cols, Pcg32& rng) {
  MatrixX<S> e(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) e(i, j) = static_cast<S>(rng.normal());
  return e;
}

/// Soft Bellman target y = r + gamma (1 - done) (min_k Q_targ_k(s', a') - alpha log pi(a'|s')).
template <class S>
RowVectorX<S> critic_target(const AgentNets<S>& n, const Batch<S>& b, const MatrixX<S>& eps_next, const SacConfig& cfg) {
  const PolicySample<S> next = evaluate_policy(n.actor, b.s_next, eps_next, cfg);
  const MatrixX<S> x = stack<S>(b.s_next, next.a);
  const RowVectorX<S> q = n.target1.forward(x).cwiseMin(n.target2.forward(x));
  const RowVectorX<S> soft = q - S(n.alpha()) * next.log_prob;
  return b.r + S(cfg.gamma) * (RowVectorX<S>::Ones(b.size()) - b.done).cwiseProduct(soft);
}

/// Mean squared error of one critic against fixed targets; accumulates the
/// parameter gradient into `grad` when given.
template <class S>
double critic_loss(const Mlp<S>& critic, const MatrixX<S>& s, const MatrixX<S>& a, const RowVectorX<S>& y,
                   VectorX<S>* grad) {
  typename Mlp<S>::Cache cache;
  const MatrixX<S> q = critic.forward(stack<S>(s, a), &cache);
  const RowVectorX<S> diff = q.row(0) - y;
  const double n = static_cast<double>(s.cols());
  if (grad) critic.backward(cache, MatrixX<S>(S(2.0 / n) * diff), grad);
  return static_cast<double>(diff.squaredNorm()) / n;
}

template <class S>
struct ActorLoss {
  double loss = 0.0;
  double mean_log_prob = 0.0;
};

/// Reparameterised actor loss mean(alpha log pi(a|s) - min(Q1, Q2)(s, a)),
/// a = sigmoid(mean + std * eps). The gradient with respect to the actor
/// parameters is accumulated into `grad`.
template <class S>
ActorLoss<S> actor_loss(const AgentNets<S>& n, const MatrixX<S>& s, const MatrixX<S>& eps, const SacConfig& cfg,
                        VectorX<S>* grad) {
  const PolicySample<S> p = evaluate_policy(n.actor, s, eps, cfg);
  const MatrixX<S> x = stack<S>(s, p.a);
  typename Mlp<S>::Cache c1, c2;
  const MatrixX<S> q1 = n.critic1.forward(x, &c1);
  const MatrixX<S> q2 = n.critic2.forward(x, &c2);
  const Eigen::Index batch = s.cols();
  const S alpha = S(n.alpha());
  const S inv_n = S(1.0 / static_cast<double>(batch));
  ActorLoss<S> out;
  for (Eigen::Index j = 0; j < batch; ++j) {
    out.loss += static_cast<double>(alpha * p.log_prob[j] - std::min(q1(0, j), q2(0, j)));
    out.mean_log_prob += static_cast<double>(p.log_prob[j]);
  }
  out.loss /= static_cast<double>(batch);
  out.mean_log_prob /= static_cast<double>(batch);
  if (!grad) return out;

  // dL/da through whichever critic is the minimum for each sample.
  MatrixX<S> w1 = MatrixX<S>::Zero(1, batch);
  MatrixX<S> w2 = MatrixX<S>::Zero(1, batch);
  for (Eigen::Index j = 0; j < batch; ++j) (q1(0, j) <= q2(0, j) ? w1 : w2)(0, j) = -inv_n;
  MatrixX<S> dx1, dx2;
  n.critic1.backward(c1, w1, nullptr, &dx1);
  n.critic2.backward(c2, w2, nullptr, &dx2);
  const int na = n.action_dim();
  const MatrixX<S> dq_da = dx1.bottomRows(na) + dx2.bottomRows(na);

  const auto a = p.a.array();
  const auto da_du = a * (S(1) - a);
  // d(log pi)/du = 2a - 1; u = mean + std * eps.
  const auto dlogp_du = S(2) * a - S(1);
  const auto dL_du = dq_da.array() * da_du + alpha * inv_n * dlogp_du;
  MatrixX<S> d_raw(2 * na, batch);
  d_raw.topRows(na) = dL_du.matrix();
  d_raw.bottomRows(na) =
      ((dL_du * p.std.array() * p.eps.array() - alpha * inv_n) * p.clamp_mask.array()).matrix();
  n.actor.backward(p.cache, d_raw, grad);
  return out;
}

/// Temperature loss -mean(log_alpha * (log pi + target_entropy)) and its
/// derivative with respect to log_alpha.
inline std::pair<double, double> alpha_loss(double log_alpha, double mean_log_prob, double target_entropy) {
  const double g = -(mean_log_prob + target_entropy);
  return {log_alpha * g, g};
}

struct SacLosses {
  double q1 = 0.0;
  double q2 = 0.0;
  double actor = 0.0;
  double alpha = 0.0;
  double alpha_value = 0.0;
  double entropy = 0.0;
};

template <class S>
struct SacOptimizer {
  Adam<S> actor;
  Adam<S> critic1;
  Adam<S> critic2;
  Adam<double> alpha;
  long updates = 0;

  static SacOptimizer create(const AgentNets<S>& n, const SacConfig& cfg) {
    SacOptimizer o;
    o.actor = Adam<S>(n.actor.parameter_count(), cfg.lr_actor);
    o.critic1 = Adam<S>(n.critic1.parameter_count(), cfg.lr_critic);
    o.critic2 = Adam<S>(n.critic2.parameter_count(), cfg.lr_critic);
    o.alpha = Adam<double>(1, cfg.lr_alpha);
    return o;
  }
};

/// One SAC gradient step on a batch: critics, then actor and temperature
/// (evaluated with the updated critics), then Polyak averaging of targets.
/// Throws NumericalError, leaving `n` untouched, if any loss is non-finite.
template <class S>
SacLosses sac_update(AgentNets<S>& n, SacOptimizer<S>& opt, const Batch<S>& b, Pcg32& noise, const SacConfig& cfg) {
  const int na = n.action_dim();
  const MatrixX<S> eps_next = standard_normal<S>(na, b.size(), noise);
  const MatrixX<S> eps_now = standard_normal<S>(na, b.size(), noise);
  const RowVectorX<S> y = critic_target(n, b, eps_next, cfg);

  AgentNets<S> next = n;
  SacLosses l;
  VectorX<S> g1 = VectorX<S>::Zero(n.critic1.parameter_count());
  VectorX<S> g2 = VectorX<S>::Zero(n.critic2.parameter_count());
  l.q1 = critic_loss(n.critic1, b.s, b.a, y, &g1);
  l.q2 = critic_loss(n.critic2, b.s, b.a, y, &g2);
  opt.critic1.step(next.critic1.params(), g1);
  opt.critic2.step(next.critic2.params(), g2);

  VectorX<S> ga = VectorX<S>::Zero(n.actor.parameter_count());
  const ActorLoss<S> al = actor_loss(next, b.s, eps_now, cfg, &ga);
  l.actor = al.loss;
  l.entropy = -al.mean_log_prob;
  const auto [alpha_l, alpha_g] = alpha_loss(n.log_alpha, al.mean_log_prob, cfg.target_entropy_per_dim * na);
  l.alpha = alpha_l;

  if (!std::isfinite(l.q1) || !std::isfinite(l.q2) || !std::isfinite(l.actor) || !std::isfinite(l.alpha) ||
      !g1.allFinite() || !g2.allFinite() || !ga.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite SAC loss at update " << opt.updates << ": q1=" << l.q1 << " q2=" << l.q2
        << " actor=" << l.actor << " alpha=" << l.alpha;
    throw NumericalError(msg.str());
  }
  opt.actor.step(next.actor.params(), ga);
  Eigen::VectorXd la(1), lg(1);
  la[0] = next.log_alpha;
  lg[0] = alpha_g;
  opt.alpha.step(la, lg);
  next.log_alpha = la[0];
  soft_update(next.target1, next.critic1, cfg.tau);
  soft_update(next.target2, next.critic2, cfg.tau);
  n = std::move(next);
  l.alpha_value = n.alpha();
  ++opt.updates;
  return l;
}

/// Action for one observation: the squashed mean when deterministic,
/// otherwise a reparameterised sample. Components lie strictly inside (0, 1).
template <class S>
std::pair<Action, double> sample_action(const Mlp<S>& actor, const Eigen::VectorXd& obs, Pcg32& rng,
                                        bool deterministic, const SacConfig& cfg) {
  const int na = actor.output_dim() / 2;
  const MatrixX<S> x = obs.cast<S>();
  MatrixX<S> eps = deterministic ? MatrixX<S>::Zero(na, 1) : standard_normal<S>(na, 1, rng);
  const PolicySample<S> p = evaluate_policy(actor, x, eps, cfg);
  Action a(na);
  constexpr double lo = 1e-9;
  for (int i = 0; i < na; ++i) a[i] = std::clamp(static_cast<double>(p.a(i, 0)), lo, 1.0 - lo);
  return {a, static_cast<double>(p.log_prob[0])};
}

/// Deterministic policy: the squashed mean action of an actor network. It
/// remembers its last action for encoders that feed it back, so call reset()
/// at every episode start.
template <class S>
class GreedyPolicy {
public:
  GreedyPolicy(Mlp<S> actor, ObservationEncoder encoder, SacConfig cfg)
      : actor_(std::move(actor)), encoder_(encoder), cfg_(cfg), previous_(Action::Zero(actor_.output_dim() / 2)) {}

  Action operator()(const Observation& obs) {
    Pcg32 unused;
    previous_ = sample_action(actor_, encoder_.encode(obs, previous_), unused, true, cfg_).first;
    return previous_;
  }
  void reset() { previous_.setZero(); }

  const Mlp<S>& actor() const { return actor_; }
  const ObservationEncoder& encoder() const { return encoder_; }

private:
  Mlp<S> actor_;
  ObservationEncoder encoder_;
  SacConfig cfg_;
  Action previous_;
};

/// Networks, optimiser state, replay memory and the per-component random
/// streams of one training run.
template <class S>
class SacAgent {
public:
  SacAgent(int obs_dim, int action_dim, SacConfig cfg, std::uint64_t seed, ObservationEncoder encoder = {})
      : cfg_(cfg),
        encoder_(encoder),
        obs_dim_(obs_dim),
        init_rng_(Pcg32::derive(seed, streams::kAgentInit)),
        sample_rng_(Pcg32::derive(seed, streams::kAgentSample)),
        replay_rng_(Pcg32::derive(seed, streams::kReplay)),
        warmup_rng_(Pcg32::derive(seed, streams::kWarmup)),
        nets_(AgentNets<S>::create(encoder_.input_dim(obs_dim, action_dim), action_dim, cfg_, init_rng_)),
        opt_(SacOptimizer<S>::create(nets_, cfg_)),
        buffer_(cfg_.buffer_capacity, encoder_.input_dim(obs_dim, action_dim), action_dim),
        previous_(Action::Zero(action_dim)) {}

  const SacConfig& config() const { return cfg_; }
  const ObservationEncoder& encoder() const { return encoder_; }
  int observation_dim() const { return obs_dim_; }
  const AgentNets<S>& nets() const { return nets_; }
  AgentNets<S>& nets() { return nets_; }
  const ReplayBuffer<S>& buffer() const { return buffer_; }
  long env_steps() const { return env_steps_; }
  long updates() const { return opt_.updates; }
  const SacLosses& last_losses() const { return last_; }

  /// Uniform random action during warm-up, a policy sample afterwards.
  Action explore(const Observation& obs) {
    if (env_steps_ < cfg_.warmup_steps) {
      Action a(nets_.action_dim());
      for (int i = 0; i < a.size(); ++i) a[i] = warmup_rng_.uniform();
      return a;
    }
    return sample_action(nets_.actor, encoder_.encode(obs, previous_), sample_rng_, false, cfg_).first;
  }

  /// Deterministic action given the previous action of the same episode
  /// (zero at the first step).
  Action act(const Observation& obs, const Action& previous) const {
    Pcg32 unused;
    return sample_action(nets_.actor, encoder_.encode(obs, previous), unused, true, cfg_).first;
  }

  /// Deterministic policy for evaluation (a copy of the current actor).
  GreedyPolicy<S> greedy() const { return GreedyPolicy<S>(nets_.actor, encoder_, cfg_); }

  /// Starts a new exploration episode.
  void begin_episode() { previous_.setZero(); }

  /// Stores the transition and runs the scheduled gradient updates.
  void observe(const Transition& t) {
    buffer_.push(encoder_.encode(t.s, previous_), t.a, t.r, encoder_.encode(t.s_next, t.a), t.done);
    previous_ = t.done ? Action::Zero(t.a.size()) : t.a;
    ++env_steps_;
    if (env_steps_ < cfg_.warmup_steps) return;
    for (int k = 0; k < cfg_.updates_per_step; ++k)
      last_ = sac_update(nets_, opt_, buffer_.sample(cfg_.batch_size, replay_rng_), sample_rng_, cfg_);
  }

private:
  SacConfig cfg_;
  ObservationEncoder encoder_;
  int obs_dim_;
  Pcg32 init_rng_;
  Pcg32 sample_rng_;
  Pcg32 replay_rng_;
  Pcg32 warmup_rng_;
  AgentNets<S> nets_;
  SacOptimizer<S> opt_;
  ReplayBuffer<S> buffer_;
  Action previous_;
  long env_steps_ = 0;
  SacLosses last_;
};

}  // namespace fesarm
