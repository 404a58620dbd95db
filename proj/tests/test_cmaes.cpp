#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "fesarm/cmaes.hpp"

using namespace fesarm;

namespace {

double sphere(const Eigen::VectorXd& x) { return x.squaredNorm(); }
double rosenbrock(const Eigen::VectorXd& x) {
  return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
}

}  // namespace

TEST(CmaEs, SphereFromThreeThree) {
  Pcg32 rng(1);
  const CmaResult r = cmaes_minimize(sphere, Eigen::Vector2d(3, 3), 1.0, 2000, rng);
  EXPECT_LT(r.f_best, 1e-8);
  EXPECT_LE(r.evaluations, 2000);
  EXPECT_NEAR(r.f_best, sphere(r.x_best), 1e-15);
}

TEST(CmaEs, RosenbrockFromMinusOneOne) {
  Pcg32 rng(2);
  const CmaResult r = cmaes_minimize(rosenbrock, Eigen::Vector2d(-1, 1), 1.0, 10000, rng);
  EXPECT_LT(r.f_best, 1e-6);
  EXPECT_NEAR(r.x_best[0], 1.0, 1e-2);
}

TEST(CmaEs, HigherDimensionalEllipsoid) {
  // Condition number 1e6 needs a properly adapted covariance.
  const auto ellipsoid = [](const Eigen::VectorXd& x) {
    double f = 0.0;
    for (int i = 0; i < x.size(); ++i) f += std::pow(1e6, i / (x.size() - 1.0)) * x[i] * x[i];
    return f;
  };
  Pcg32 rng(3);
  const CmaResult r = cmaes_minimize(ellipsoid, Eigen::VectorXd::Ones(8), 1.0, 20000, rng);
  EXPECT_LT(r.f_best, 1e-8);
}

TEST(CmaEs, ConstantObjective) {
  Pcg32 rng(4);
  const CmaResult r = cmaes_minimize([](const Eigen::VectorXd&) { return 4.5; }, Eigen::Vector3d(1, 2, 3), 0.5, 600, rng);
  EXPECT_TRUE(r.x_best.allFinite());
  EXPECT_EQ(r.f_best, 4.5);
}

TEST(CmaEs, NonFiniteValuesRankLast) {
  // NaN outside the unit box; the search must still converge to the optimum inside it.
  const auto f = [](const Eigen::VectorXd& x) {
    if (x.cwiseAbs().maxCoeff() > 1.0) return std::numeric_limits<double>::quiet_NaN();
    return (x - Eigen::Vector2d(0.5, -0.25)).squaredNorm();
  };
  Pcg32 rng(5);
  const CmaResult r = cmaes_minimize(f, Eigen::Vector2d(0, 0), 0.8, 3000, rng);
  EXPECT_LT(r.f_best, 1e-8);
}

TEST(CmaEs, RankingInvariantUnderMonotoneTransform) {
  CmaOptions opt;
  opt.record_rankings = true;
  // Values stay in a range where exp(f) neither overflows nor loses the
  // differences between candidates to rounding.
  Pcg32 a(6), b(6);
  const Eigen::Vector3d x0(2, -1, 1);
  const CmaResult ra = cmaes_minimize(sphere, x0, 0.5, 280, a, opt);
  const CmaResult rb = cmaes_minimize([](const Eigen::VectorXd& x) { return std::exp(sphere(x)); }, x0, 0.5, 280, b, opt);
  ASSERT_EQ(ra.history.size(), rb.history.size());
  for (std::size_t g = 0; g < ra.history.size(); ++g) {
    ASSERT_FALSE(ra.history[g].ranking.empty());
    EXPECT_EQ(ra.history[g].ranking, rb.history[g].ranking) << "generation " << g;
  }
  EXPECT_EQ(ra.x_best, rb.x_best);
}

TEST(CmaEs, BestEverIsNonIncreasing) {
  Pcg32 rng(7);
  const CmaResult r = cmaes_minimize(rosenbrock, Eigen::Vector2d(-1.5, 2), 0.5, 3000, rng);
  ASSERT_GT(r.history.size(), 10u);
  for (std::size_t g = 1; g < r.history.size(); ++g) {
    EXPECT_LE(r.history[g].best_ever, r.history[g - 1].best_ever);
    EXPECT_LE(r.history[g].best_ever, r.history[g].best_in_generation);
  }
  EXPECT_EQ(r.history.back().best_ever, r.f_best);
}

TEST(CmaEs, SameSeedIsDeterministic) {
  Pcg32 a(8), b(8);
  const CmaResult ra = cmaes_minimize(rosenbrock, Eigen::Vector2d(0, 0), 0.3, 500, a);
  const CmaResult rb = cmaes_minimize(rosenbrock, Eigen::Vector2d(0, 0), 0.3, 500, b);
  EXPECT_EQ(ra.x_best, rb.x_best);
  EXPECT_EQ(ra.f_best, rb.f_best);
}

TEST(CmaEs, RejectsBadArguments) {
  Pcg32 rng(9);
  EXPECT_THROW(cmaes_minimize(sphere, Eigen::Vector2d(0, 0), 0.0, 100, rng), InvalidInput);
  EXPECT_THROW(cmaes_minimize(sphere, Eigen::Vector2d(0, 0), 1.0, 3, rng), InvalidInput);
  EXPECT_THROW(CmaState(Eigen::VectorXd(0), 1.0), InvalidInput);
}

TEST(CmaEs, DefaultPopulationSize) {
  EXPECT_EQ(CmaState(Eigen::VectorXd::Zero(2), 1.0).lambda(), 6);
  EXPECT_EQ(CmaState(Eigen::VectorXd::Zero(8), 1.0).lambda(), 10);
}

TEST(CmaEs, CovarianceStaysSymmetricPositiveDefinite) {
  CmaState es(Eigen::VectorXd::Constant(5, 2.0), 1.0);
  Pcg32 rng(10);
  for (int g = 0; g < 200; ++g) {
    const auto xs = es.ask(rng);
    std::vector<double> f;
    for (const auto& x : xs) f.push_back(rosenbrock(x.head(2)) + x.tail(3).squaredNorm());
    es.tell(f);
    const Eigen::MatrixXd& c = es.covariance();
    ASSERT_LT((c - c.transpose()).cwiseAbs().maxCoeff(), 1e-12 * c.cwiseAbs().maxCoeff());
    ASSERT_GT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(c).eigenvalues().minCoeff(), 0.0);
    ASSERT_GT(es.sigma(), 0.0);
  }
}
