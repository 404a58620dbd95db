#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "fesarm/errors.hpp"
#include "fesarm/rng.hpp"

namespace fesarm {

struct CmaOptions {
  int lambda = 0;                 ///< population size; 0 selects 4 + floor(3 ln n)
  double max_condition = 1e14;    ///< eigenvalue floor trigger for C
  double f_target = -std::numeric_limits<double>::infinity();  ///< stop once the best value reaches this
  double sigma_min = 0.0;         ///< stop once sigma falls below this
  bool record_rankings = false;   ///< keep the per-generation candidate order in the history
};

struct CmaGeneration {
  int generation = 0;
  long evaluations = 0;
  double best_in_generation = 0.0;
  double best_ever = 0.0;
  double sigma = 0.0;
  std::vector<int> ranking;  ///< candidate indices sorted best first (if recorded)
};

struct CmaResult {
  Eigen::VectorXd x_best;
  double f_best = std::numeric_limits<double>::infinity();
  long evaluations = 0;
  std::vector<CmaGeneration> history;
};

/// (mu/mu_w, lambda)-CMA-ES with cumulative step-size adaptation and
/// rank-one plus rank-mu covariance updates, using the default strategy
/// parameters of Hansen's tutorial.
class CmaState {
public:
  CmaState(const Eigen::VectorXd& x0, double sigma0, const CmaOptions& opt = {})
      : n_(static_cast<int>(x0.size())), mean_(x0), sigma_(sigma0) {
    if (n_ < 1) throw InvalidInput("CMA-ES needs at least one parameter");
    if (!(sigma0 > 0) || !std::isfinite(sigma0)) throw InvalidInput("sigma0 must be positive");
    if (!x0.allFinite()) throw InvalidInput("x0 must be finite");
    const double n = n_;
    lambda_ = opt.lambda > 0 ? opt.lambda : 4 + static_cast<int>(std::floor(3.0 * std::log(n)));
    if (lambda_ < 4) throw InvalidInput("population size must be at least 4");
    mu_ = lambda_ / 2;
    weights_.resize(mu_);
    for (int i = 0; i < mu_; ++i) weights_[i] = std::log(mu_ + 0.5) - std::log(i + 1.0);
    weights_ /= weights_.sum();
    mu_eff_ = 1.0 / weights_.squaredNorm();
    cs_ = (mu_eff_ + 2) / (n + mu_eff_ + 5);
    ds_ = 1 + 2 * std::max(0.0, std::sqrt((mu_eff_ - 1) / (n + 1)) - 1) + cs_;
    cc_ = (4 + mu_eff_ / n) / (n + 4 + 2 * mu_eff_ / n);
    c1_ = 2 / ((n + 1.3) * (n + 1.3) + mu_eff_);
    cmu_ = std::min(1 - c1_, 2 * (mu_eff_ - 2 + 1 / mu_eff_) / ((n + 2) * (n + 2) + mu_eff_));
    chi_n_ = std::sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n));
    max_condition_ = opt.max_condition;
    C_ = Eigen::MatrixXd::Identity(n_, n_);
    B_ = C_;
    D_ = Eigen::VectorXd::Ones(n_);
    pc_ = ps_ = Eigen::VectorXd::Zero(n_);
  }

  int dimension() const { return n_; }
  int lambda() const { return lambda_; }
  int mu() const { return mu_; }
  double mu_eff() const { return mu_eff_; }
  double sigma() const { return sigma_; }
  int generation() const { return generation_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& covariance() const { return C_; }
  const Eigen::VectorXd& weights() const { return weights_; }

  /// Draws lambda candidates x = m + sigma * B D z.
  std::vector<Eigen::VectorXd> ask(Pcg32& rng) {
    z_.resize(n_, lambda_);
    for (int k = 0; k < lambda_; ++k)
      for (int i = 0; i < n_; ++i) z_(i, k) = rng.normal();
    y_ = B_ * D_.asDiagonal() * z_;
    std::vector<Eigen::VectorXd> xs(lambda_);
    for (int k = 0; k < lambda_; ++k) xs[k] = mean_ + sigma_ * y_.col(k);
    return xs;
  }

  /// Ranks the last population (non-finite values last, ties by index) and
  /// updates mean, evolution paths, covariance and step size. Returns the
  /// ranking, best first.
  std::vector<int> tell(const std::vector<double>& f) {
    if (static_cast<int>(f.size()) != lambda_ || y_.cols() != lambda_) throw InvalidInput("tell: need one value per candidate from ask()");
    std::vector<int> order(lambda_);
    std::iota(order.begin(), order.end(), 0);
    const auto key = [&](int i) { return std::isfinite(f[i]) ? f[i] : std::numeric_limits<double>::infinity(); };
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return key(a) < key(b); });

    Eigen::VectorXd yw = Eigen::VectorXd::Zero(n_);
    Eigen::VectorXd zw = Eigen::VectorXd::Zero(n_);
    for (int i = 0; i < mu_; ++i) {
      yw += weights_[i] * y_.col(order[i]);
      zw += weights_[i] * z_.col(order[i]);
    }
    mean_ += sigma_ * yw;
    // C^(-1/2) y_w = B z_w.
    ps_ = (1 - cs_) * ps_ + std::sqrt(cs_ * (2 - cs_) * mu_eff_) * (B_ * zw);
    ++generation_;
    const double ps_norm = ps_.norm();
    const bool hsig =
        ps_norm / std::sqrt(1 - std::pow(1 - cs_, 2.0 * generation_)) < (1.4 + 2.0 / (n_ + 1)) * chi_n_;
    pc_ = (1 - cc_) * pc_ + (hsig ? std::sqrt(cc_ * (2 - cc_) * mu_eff_) : 0.0) * yw;
    Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n_, n_);
    for (int i = 0; i < mu_; ++i) rank_mu += weights_[i] * y_.col(order[i]) * y_.col(order[i]).transpose();
    const double delta = hsig ? 0.0 : cc_ * (2 - cc_);
    C_ = (1 - c1_ - cmu_) * C_ + c1_ * (pc_ * pc_.transpose() + delta * C_) + cmu_ * rank_mu;
    sigma_ *= std::exp((cs_ / ds_) * (ps_norm / chi_n_ - 1));
    decompose();
    return order;
  }

private:
  void decompose() {
    C_ = 0.5 * (C_ + C_.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C_);
    if (es.info() != Eigen::Success) throw NumericalError("CMA-ES covariance eigendecomposition failed");
    Eigen::VectorXd ev = es.eigenvalues();
    const double top = ev.maxCoeff();
    const double floor = top / max_condition_;
    if (!(top > 0) || !std::isfinite(top)) throw NumericalError("CMA-ES covariance is degenerate");
    if (ev.minCoeff() < floor) {
      ev = ev.cwiseMax(floor);
      C_ = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    }
    B_ = es.eigenvectors();
    D_ = ev.cwiseSqrt();
  }

  int n_;
  int lambda_ = 0;
  int mu_ = 0;
  Eigen::VectorXd weights_;
  double mu_eff_ = 0, cs_ = 0, ds_ = 0, cc_ = 0, c1_ = 0, cmu_ = 0, chi_n_ = 0;
  double max_condition_ = 1e14;
  Eigen::VectorXd mean_;
  double sigma_;
  Eigen::MatrixXd C_, B_;
  Eigen::VectorXd D_;
  Eigen::VectorXd pc_, ps_;
  Eigen::MatrixXd z_, y_;
  int generation_ = 0;
};

using Objective = std::function<double(const Eigen::VectorXd&)>;

/// Minimises f within `budget` evaluations (whole generations only) and
/// returns the best candidate ever evaluated.
inline CmaResult cmaes_minimize(const Objective& f, const Eigen::VectorXd& x0, double sigma0, long budget, Pcg32& rng,
                                const CmaOptions& opt = {}) {
  CmaState es(x0, sigma0, opt);
  if (budget < es.lambda()) throw InvalidInput("budget smaller than one generation");
  CmaResult res;
  res.x_best = x0;
  std::vector<double> values(es.lambda());
  while (res.evaluations + es.lambda() <= budget) {
    const auto xs = es.ask(rng);
    CmaGeneration g;
    g.best_in_generation = std::numeric_limits<double>::infinity();
    for (int k = 0; k < es.lambda(); ++k) {
      const double v = f(xs[k]);
      values[k] = std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
      ++res.evaluations;
      g.best_in_generation = std::min(g.best_in_generation, values[k]);
      if (values[k] < res.f_best) {
        res.f_best = values[k];
        res.x_best = xs[k];
      }
    }
    auto ranking = es.tell(values);
    g.generation = es.generation();
    g.evaluations = res.evaluations;
    g.best_ever = res.f_best;
    g.sigma = es.sigma();
    if (opt.record_rankings) g.ranking = std::move(ranking);
    res.history.push_back(std::move(g));
    if (res.f_best <= opt.f_target || es.sigma() < opt.sigma_min) break;
  }
  return res;
}

}  // namespace fesarm
