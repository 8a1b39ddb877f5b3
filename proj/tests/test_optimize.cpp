#include "blockcv/errors.hpp"
#include "blockcv/optimize.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace blockcv;

TEST(Maximize, ConcaveQuadratic) {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd q = oracle::random_spd(6, rng);
  const Eigen::VectorXd m = oracle::random_vector(6, rng, 3.0);
  const Objective f = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    const Eigen::VectorXd r = x - m;
    if (g)
      *g = -q * r;
    return -0.5 * r.dot(q * r);
  };
  const auto r = maximize(f, Eigen::VectorXd::Zero(6));
  EXPECT_TRUE(r.converged);
  EXPECT_LT((r.x - m).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_TRUE(negative_hessian(f, r.x).isApprox(q, 1e-7));
}

TEST(Maximize, Rosenbrock) {
  const Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    const double a = 1 - x(0), b = x(1) - x(0) * x(0);
    if (g) {
      (*g)(0) = -(-2 * a - 400 * x(0) * b);
      (*g)(1) = -(200 * b);
    }
    return -(a * a + 100 * b * b);
  };
  const auto r = maximize(f, Eigen::Vector2d(-1.2, 1.0));
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x(0), 1.0, 1e-5);
  EXPECT_NEAR(r.x(1), 1.0, 1e-5);
}

TEST(Maximize, StaysInsideSupport) {
  // log x - x peaks at 1 and is undefined for x <= 0.
  const Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    if (x(0) <= 0)
      return -std::numeric_limits<double>::infinity();
    if (g)
      *g = Eigen::VectorXd::Constant(1, 1.0 / x(0) - 1.0);
    return std::log(x(0)) - x(0);
  };
  const auto r = maximize(f, Eigen::VectorXd::Constant(1, 0.05));
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x(0), 1.0, 1e-6);
}

TEST(Maximize, ReportsNonConvergence) {
  const Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    if (g)
      *g = Eigen::VectorXd::Ones(1);
    return x(0);
  };
  OptimizerOptions opts;
  opts.max_iterations = 5;
  EXPECT_FALSE(maximize(f, Eigen::VectorXd::Zero(1), opts).converged);
}

TEST(NegativeHessian, ThrowsOffSupport) {
  const Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    if (x(0) < 0)
      return -std::numeric_limits<double>::infinity();
    if (g)
      *g = -x;
    return -0.5 * x.squaredNorm();
  };
  EXPECT_THROW(negative_hessian(f, Eigen::VectorXd::Zero(1)), DegenerateCurvatureError);
}
