#include "blockcv/errors.hpp"
#include "blockcv/gaussian.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace blockcv;

TEST(Gaussian, LogDensityMatchesOracleBothShapes) {
  std::mt19937_64 rng(11);
  for (int n : {1, 2, 5, 17}) {
    const Eigen::MatrixXd cov = oracle::random_spd(n, rng);
    const Eigen::VectorXd mean = oracle::random_vector(n, rng);
    const Eigen::VectorXd y = oracle::random_vector(n, rng, 2.0);
    const double want = oracle::mvn_log_density(y, mean, cov);
    EXPECT_NEAR(log_density(GaussianDensity::from_covariance(mean, cov), y), want, 1e-9);
    EXPECT_NEAR(log_density(GaussianDensity::from_precision(mean, cov.inverse()), y), want, 1e-9);
  }
}

TEST(Gaussian, ShapesConvert) {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd cov = oracle::random_spd(6, rng);
  const auto g = GaussianDensity::from_precision(Eigen::VectorXd::Zero(6), cov.inverse());
  EXPECT_EQ(g.shape(), Shape::precision);
  EXPECT_TRUE(g.covariance().isApprox(cov, 1e-10));
  EXPECT_NEAR(g.log_det(), -std::log(cov.determinant()), 1e-10);
}

TEST(Gaussian, NotPositiveDefiniteThrows) {
  Eigen::Matrix2d bad;
  bad << 1, 2, 2, 1;
  EXPECT_THROW(GaussianDensity::from_covariance(Eigen::Vector2d::Zero(), bad), SingularModelError);
}

TEST(Gaussian, DimensionMismatchThrows) {
  const auto g = GaussianDensity::from_covariance(Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity());
  EXPECT_THROW(log_density(g, Eigen::Vector3d::Zero()), std::invalid_argument);
}

TEST(Gaussian, PermutationInvariance) {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd cov = oracle::random_spd(5, rng);
  const Eigen::VectorXd mean = oracle::random_vector(5, rng);
  const Eigen::VectorXd y = oracle::random_vector(5, rng);
  const std::vector<Index> order{3, 0, 4, 1, 2};
  for (const auto& g : {GaussianDensity::from_covariance(mean, cov),
                        GaussianDensity::from_precision(mean, cov.inverse())}) {
    const auto p = g.permuted(order);
    EXPECT_NEAR(log_density(p, oracle::take(y, order)), log_density(g, y), 1e-10);
  }
}

TEST(Gaussian, MarginalAndConditionalMatchOracle) {
  std::mt19937_64 rng(9);
  const Eigen::MatrixXd cov = oracle::random_spd(7, rng);
  const Eigen::VectorXd mean = oracle::random_vector(7, rng);
  const std::vector<Index> keep{1, 4, 6};
  const std::vector<Index> given{0, 2, 3};
  const Eigen::VectorXd values = oracle::random_vector(3, rng);
  const auto want = oracle::condition(mean, cov, keep, given, values);
  for (const auto& g : {GaussianDensity::from_covariance(mean, cov),
                        GaussianDensity::from_precision(mean, cov.inverse())}) {
    const auto m = g.marginal(keep);
    EXPECT_TRUE(m.mean().isApprox(oracle::take(mean, keep), 1e-12));
    EXPECT_TRUE(m.covariance().isApprox(oracle::take(cov, keep, keep), 1e-10));
    const auto c = g.conditional(keep, given, values);
    EXPECT_TRUE(c.mean().isApprox(want.mean, 1e-9));
    EXPECT_TRUE(c.covariance().isApprox(want.cov, 1e-9));
  }
}

TEST(Gaussian, SimulationIsSeededAndHasTheRightCovariance) {
  Eigen::Matrix2d cov;
  cov << 2.0, 0.6, 0.6, 1.0;
  const Eigen::Vector2d mean(1.0, -1.0);
  for (const auto& g : {GaussianDensity::from_covariance(mean, cov),
                        GaussianDensity::from_precision(mean, cov.inverse())}) {
    Stream a(42), b(42);
    EXPECT_EQ(simulate(g, a), simulate(g, b));
    Stream rng(7);
    const int draws = 40000;
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    Eigen::Matrix2d outer = Eigen::Matrix2d::Zero();
    for (int i = 0; i < draws; ++i) {
      const Eigen::VectorXd x = simulate(g, rng);
      sum += x;
      outer += (x - mean) * (x - mean).transpose();
    }
    EXPECT_TRUE((sum / draws - mean).cwiseAbs().maxCoeff() < 0.03);
    EXPECT_TRUE((outer / draws - cov).cwiseAbs().maxCoeff() < 0.06);
  }
}

TEST(Gaussian, UnivariateNormal) {
  EXPECT_NEAR(normal_log_density(0.0, 0.0, 1.0), -0.5 * std::log(2.0 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(normal_log_density(3.0, 1.0, 4.0),
              -0.5 * std::log(2.0 * std::numbers::pi * 4.0) - 0.5, 1e-15);
}
