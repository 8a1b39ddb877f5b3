#include "blockcv/errors.hpp"
#include "blockcv/scoring.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace blockcv;

namespace {

PredictiveBlock block(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  return {GaussianDensity::from_covariance(mean, cov)};
}

} // namespace

TEST(ScoreFold, BivariateExample) {
  Eigen::Matrix2d cov;
  cov << 1, 0.9, 0.9, 1;
  const FoldScore s = score_fold(block(Eigen::Vector2d::Zero(), cov), Eigen::Vector2d::Zero());
  const double log2pi = std::log(2 * std::numbers::pi);
  EXPECT_NEAR(s.joint, -log2pi - 0.5 * std::log(0.19), 1e-12);
  EXPECT_NEAR(s.pointwise, -log2pi, 1e-12);
  EXPECT_NEAR(s.joint, -1.007, 1e-3);
  EXPECT_NEAR(s.pointwise, -1.838, 1e-3);
  EXPECT_GT(s.joint, s.pointwise);
}

TEST(ScoreFold, SingletonAndDiagonalAgree) {
  const FoldScore one =
      score_fold(block(Eigen::VectorXd::Constant(1, 0.3), Eigen::MatrixXd::Constant(1, 1, 2.0)),
                 Eigen::VectorXd::Constant(1, 1.1));
  EXPECT_EQ(one.joint, one.pointwise);
  const Eigen::Vector3d var(0.5, 1.0, 3.0);
  const FoldScore diag =
      score_fold(block(Eigen::Vector3d(1, 2, 3), var.asDiagonal().toDenseMatrix()), Eigen::Vector3d(0, 0, 0));
  EXPECT_NEAR(diag.joint, diag.pointwise, 1e-10);
}

TEST(ScoreFold, DimensionMismatch) {
  EXPECT_THROW(score_fold(block(Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity()),
                          Eigen::Vector3d::Zero()),
               std::invalid_argument);
}

TEST(Elpd, SumsAndFailures) {
  std::vector<FoldScore> s(3);
  s[0].joint = -1;
  s[1].joint = -2;
  s[2].joint = -3;
  EXPECT_EQ(elpd_cv(s, ScoreMode::joint), -6.0);
  EXPECT_EQ(elpd_cv({s[1]}, ScoreMode::joint), -2.0);
  s.push_back(failed_fold(3, 4));
  EXPECT_THROW(elpd_cv(s, ScoreMode::joint), IncompleteReplicationError);
}

TEST(Pairwise, Antisymmetric) {
  EXPECT_EQ(pairwise_stat(-10, -12), 2.0);
  EXPECT_EQ(pairwise_stat(-3, -3), 0.0);
  EXPECT_EQ(pairwise_stat(-1.5, 2.25), -pairwise_stat(2.25, -1.5));
}

TEST(SampleZ, Arithmetic) {
  EXPECT_NEAR(sample_z({1, 2, 3}), 6 / std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(sample_z({1, 2, 3}), 3.4641, 1e-4);
  EXPECT_EQ(sample_z({-1, -2, -3}), -sample_z({1, 2, 3}));
  EXPECT_THROW(sample_z({2, 2, 2}), UndefinedStatisticError);
  EXPECT_THROW(sample_z({1}), UndefinedStatisticError);
}

TEST(PopulationSummary, Untrimmed) {
  const auto p = population_summary({1, 2, 3});
  EXPECT_DOUBLE_EQ(p.mean, 2.0);
  EXPECT_DOUBLE_EQ(p.sd, 1.0);
  ASSERT_TRUE(p.z);
  EXPECT_DOUBLE_EQ(*p.z, 2.0);
  EXPECT_DOUBLE_EQ(p.accuracy, 1.0);

  const auto q = population_summary({-1, 1});
  EXPECT_DOUBLE_EQ(*q.z, 0.0);
  EXPECT_DOUBLE_EQ(q.accuracy, 0.5);
  EXPECT_THROW(population_summary({1.0}), std::invalid_argument);
}

TEST(PopulationSummary, TiesCountAsIncorrect) {
  EXPECT_DOUBLE_EQ(population_summary({0, 0, 1, -1}).accuracy, 0.25);
}

TEST(PopulationSummary, TrimmedExample) {
  std::vector<double> s(98, 1.0);
  s.push_back(-1000);
  s.push_back(1000);
  EXPECT_EQ(trim_count(100, 0.98), 1u);
  const auto p = population_summary(s, 0.98);
  EXPECT_EQ(p.n_trimmed, 98u);
  EXPECT_DOUBLE_EQ(p.mean, 1.0);
  EXPECT_DOUBLE_EQ(p.sd, 0.0);
  EXPECT_FALSE(p.z.has_value());
  EXPECT_DOUBLE_EQ(p.accuracy, 0.99);
}

TEST(PopulationSummary, ZIsScaleInvariant) {
  const std::vector<double> s{0.3, -1.2, 2.5, 0.9, 1.4};
  std::vector<double> t;
  for (double v : s)
    t.push_back(7.5 * v);
  EXPECT_NEAR(*population_summary(s).z, *population_summary(t).z, 1e-12);
}

TEST(TrimCount, Rounding) {
  EXPECT_EQ(trim_count(1200, 0.98), 12u);
  EXPECT_EQ(trim_count(10, 0.98), 1u);
  EXPECT_EQ(trim_count(10, 1.0), 0u);
  EXPECT_THROW(trim_count(10, 0.0), std::invalid_argument);
}
