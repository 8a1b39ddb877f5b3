#include "blockcv/errors.hpp"
#include "blockcv/models.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace blockcv;

namespace {

Eigen::MatrixXd design(Index n, int p, std::mt19937_64& rng) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(n, p);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int j = 1; j < p; ++j)
    for (Index i = 0; i < n; ++i)
      x(i, j) = z(rng);
  return x;
}

ModelSpec sar_spec(Family family, Scheme scheme = Scheme::rook, std::vector<int> columns = {0, 1}) {
  ModelSpec m;
  m.name = "m";
  m.family = family;
  m.scheme = scheme;
  m.columns = std::move(columns);
  return m;
}

ModelSpec kernel_spec(KernelKind kind) {
  ModelSpec m;
  m.name = "k";
  m.family = Family::kernel;
  m.kernel = kind;
  return m;
}

} // namespace

TEST(Sar, TwoCellPrecision) {
  const auto w = row_standardize(contiguity(Lattice(1, 2), Scheme::rook));
  const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 1);
  const auto g = sar_density(w, x, SarParams{Eigen::VectorXd::Zero(1), 0.5, 1.0});
  Eigen::Matrix2d want;
  want << 1.25, -1.0, -1.0, 1.25;
  EXPECT_TRUE(g.precision().isApprox(want, 1e-14));
}

TEST(Sar, DensitiesMatchDenseOracle) {
  std::mt19937_64 rng(1);
  const Lattice lattice(4, 5);
  const auto w = row_standardize(contiguity(lattice, Scheme::queen));
  const Eigen::MatrixXd x = design(lattice.size(), 2, rng);
  const SarParams p{Eigen::Vector2d(0.5, -1.0), 0.7, 2.0};
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(20, 20) - p.rho * w.dense();
  const Eigen::MatrixXd cov = p.sigma2 * (a.transpose() * a).inverse();
  const Eigen::VectorXd y = oracle::random_vector(20, rng, 2.0);

  const Eigen::VectorXd sar_mean = a.inverse() * x * p.beta;
  EXPECT_NEAR(log_density(sar_density(w, x, p), y), oracle::mvn_log_density(y, sar_mean, cov), 1e-9);
  const Eigen::VectorXd err_mean = x * p.beta;
  EXPECT_NEAR(log_density(modified_sar_density(w, x, p), y),
              oracle::mvn_log_density(y, err_mean, cov), 1e-9);
}

TEST(Sar, PaperGridRhosFactorize) {
  const Lattice lattice(24, 24);
  const auto w = row_standardize(contiguity(lattice, Scheme::rook));
  const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(lattice.size(), 1);
  for (double rho : {0.0, 0.25, 0.5, 0.75, 0.95, 0.99})
    EXPECT_NO_THROW(sar_density(w, x, SarParams{Eigen::VectorXd::Ones(1), rho, 5.0}));
}

TEST(Sar, RhoInterval) {
  const auto standardized = row_standardize(contiguity(Lattice(3, 3), Scheme::rook));
  const auto [lo, hi] = rho_interval(standardized);
  EXPECT_DOUBLE_EQ(lo, 0.0);
  EXPECT_DOUBLE_EQ(hi, 1.0);

  const auto raw = contiguity(Lattice(3, 3), Scheme::rook);
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(raw.dense()).eigenvalues();
  const auto [rlo, rhi] = rho_interval(raw);
  EXPECT_NEAR(rlo, 1.0 / ev.minCoeff(), 1e-12);
  EXPECT_NEAR(rhi, 1.0 / ev.maxCoeff(), 1e-12);
  EXPECT_TRUE(adjacency_spectrum(raw).isApprox(ev, 1e-12));
}

TEST(Sar, StandardizedSpectrumMatchesDenseEigenvalues) {
  const auto w = row_standardize(contiguity(Lattice(4, 6), Scheme::queen));
  const Eigen::VectorXcd ev = Eigen::EigenSolver<Eigen::MatrixXd>(w.dense()).eigenvalues();
  std::vector<double> re;
  for (Index i = 0; i < ev.size(); ++i) {
    EXPECT_NEAR(ev(i).imag(), 0.0, 1e-10);
    re.push_back(ev(i).real());
  }
  std::sort(re.begin(), re.end());
  const Eigen::VectorXd got = adjacency_spectrum(w);
  for (std::size_t i = 0; i < re.size(); ++i)
    EXPECT_NEAR(got(static_cast<Index>(i)), re[i], 1e-10);
}

TEST(Kernel, Values) {
  EXPECT_NEAR(kernel_shape(KernelKind::matern_half, 2.0, 2.0), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(kernel_shape(KernelKind::exp_quadratic, 2.0, 2.0), std::exp(-0.5), 1e-15);
  const DistanceMatrix d = distances(Lattice(2, 2));
  const Eigen::MatrixXd k = kernel_matrix(KernelKind::matern_half, d, KernelParams{1.0, 2.0});
  EXPECT_NEAR(k(0, 0), 4.0, 1e-15);
  EXPECT_NEAR(k(0, 3), 4.0 * std::exp(-std::sqrt(2.0)), 1e-14);
}

TEST(Kernel, JitterRescuesSmoothKernel) {
  // A long exponentiated-quadratic length scale is numerically singular.
  const DistanceMatrix d = distances(Lattice(6, 6));
  EXPECT_NO_THROW(kernel_covariance(KernelKind::exp_quadratic, d, KernelParams{10.0, 1.0}));
}

TEST(Priors, ClosedForms) {
  const ScalarPrior beta{PriorKind::beta, 2.0, 2.0, 0.0, 1.0};
  EXPECT_NEAR(beta.log_pdf(0.5), std::log(1.5), 1e-14);
  EXPECT_EQ(beta.log_pdf(1.2), minus_infinity);
  const ScalarPrior wide{PriorKind::beta, 2.0, 2.0, -2.0, 2.0};
  EXPECT_NEAR(wide.log_pdf(0.0), std::log(1.5) - std::log(4.0), 1e-14);

  const ScalarPrior half{PriorKind::half_normal, 0.0, 10.0};
  EXPECT_NEAR(half.log_pdf(0.0), std::log(2.0 / std::sqrt(2.0 * std::numbers::pi * 10.0)), 1e-14);
  EXPECT_EQ(half.log_pdf(-0.1), minus_infinity);

  PriorSpec spec;
  const SarParams p{Eigen::Vector2d(1.0, -2.0), 0.5, 1.0};
  const double want = normal_log_density(1.0, 0.0, 10.0) + normal_log_density(-2.0, 0.0, 10.0) +
                      std::log(1.5) + std::log(2.0) + normal_log_density(1.0, 0.0, 10.0);
  EXPECT_NEAR(log_prior(p, spec), want, 1e-12);
  EXPECT_NEAR(log_prior(KernelParams{1.0, 1.0}, spec), 2.0 * (std::log(2.0) + normal_log_density(1.0, 0.0, 1.0)), 1e-12);
}

TEST(Priors, DerivativesMatchDifferences) {
  for (const ScalarPrior& p : {ScalarPrior{PriorKind::normal, 0.5, 3.0},
                               ScalarPrior{PriorKind::beta, 2.0, 3.0, -1.0, 1.0},
                               ScalarPrior{PriorKind::half_normal, 0.0, 10.0}}) {
    for (double x : {0.1, 0.3, 0.7}) {
      const double h = 1e-6;
      EXPECT_NEAR(p.d_log_pdf(x), (p.log_pdf(x + h) - p.log_pdf(x - h)) / (2 * h), 1e-6);
    }
  }
}

class FamilyCase : public ::testing::TestWithParam<int> {};

TEST_P(FamilyCase, FastGradientMatchesDenseRoute) {
  std::mt19937_64 rng(100 + GetParam());
  const Lattice lattice(4, 4);
  ModelSpec spec;
  switch (GetParam()) {
  case 0: spec = sar_spec(Family::sar); break;
  case 1: spec = sar_spec(Family::modified_sar, Scheme::queen); break;
  case 2: spec = kernel_spec(KernelKind::matern_half); break;
  default: spec = kernel_spec(KernelKind::exp_quadratic); break;
  }
  const ModelStructure m(lattice, spec);
  const Eigen::MatrixXd x = design(lattice.size(), 2, rng);
  const Eigen::VectorXd y = oracle::random_vector(16, rng, 1.5);
  Eigen::VectorXd params = m.is_sar() ? Eigen::VectorXd(Eigen::Vector4d(0.3, -0.8, 0.6, 1.7))
                                      : Eigen::VectorXd(Eigen::Vector2d(1.3, 0.8));
  const auto g = log_density_gradient(m, params, x, y);
  const auto dense = model_density(m, params, m.select_columns(x));
  EXPECT_NEAR(g.value, log_density(dense, y), 1e-9);

  const auto value_at = [&](const Eigen::VectorXd& p) {
    return log_density_gradient(m, p, x, y, false).value;
  };
  const Eigen::VectorXd fd = oracle::central_gradient(value_at, params, 1e-6);
  for (Index i = 0; i < fd.size(); ++i)
    EXPECT_NEAR(g.d_params(i), fd(i), 1e-5 * (1.0 + std::abs(fd(i))));
  const auto value_y = [&](const Eigen::VectorXd& yy) {
    return log_density_gradient(m, params, x, yy, false).value;
  };
  const Eigen::VectorXd fdy = oracle::central_gradient(value_y, y, 1e-6);
  EXPECT_LT((g.d_y - fdy).cwiseAbs().maxCoeff(), 1e-5);
}

TEST_P(FamilyCase, ConditionalModeMatchesOracle) {
  std::mt19937_64 rng(200 + GetParam());
  const Lattice lattice(4, 5);
  ModelSpec spec = GetParam() == 0   ? sar_spec(Family::sar)
                   : GetParam() == 1 ? sar_spec(Family::modified_sar, Scheme::queen)
                   : GetParam() == 2 ? kernel_spec(KernelKind::matern_half)
                                     : kernel_spec(KernelKind::exp_quadratic);
  const ModelStructure m(lattice, spec);
  const Eigen::MatrixXd x = design(lattice.size(), 2, rng);
  const Eigen::VectorXd y = oracle::random_vector(20, rng);
  Eigen::VectorXd params = m.is_sar() ? Eigen::VectorXd(Eigen::Vector4d(1.0, 0.5, 0.8, 2.0))
                                      : Eigen::VectorXd(Eigen::Vector2d(1.5, 1.2));
  const std::vector<Index> missing{2, 7, 8, 13};
  std::vector<Index> observed;
  for (Index i = 0; i < 20; ++i)
    if (std::find(missing.begin(), missing.end(), i) == missing.end())
      observed.push_back(i);
  const auto dense = model_density(m, params, m.select_columns(x));
  const auto want =
      oracle::condition(dense.mean(), dense.covariance(), missing, observed, oracle::take(y, observed));
  const Eigen::VectorXd got = conditional_mode(m, params, x, y, missing);
  EXPECT_LT((got - want.mean).cwiseAbs().maxCoeff(), 1e-8);
}

INSTANTIATE_TEST_SUITE_P(Families, FamilyCase, ::testing::Values(0, 1, 2, 3));

TEST(ModelStructure, ParameterLayoutAndClamps) {
  ModelSpec spec = sar_spec(Family::sar, Scheme::rook, {0, 2});
  spec.clamp.rho = 0.4;
  const ModelStructure m(Lattice(3, 3), spec);
  ASSERT_EQ(m.parameter_count(), 4);
  EXPECT_EQ(m.parameters()[2].role, ParameterRole::autoregressive);
  EXPECT_EQ(m.parameters()[3].role, ParameterRole::positive);
  EXPECT_TRUE(m.parameters()[2].clamped.has_value());
  EXPECT_FALSE(m.parameters()[0].clamped.has_value());

  std::mt19937_64 rng(4);
  const Eigen::MatrixXd x = design(9, 3, rng);
  const Eigen::MatrixXd sel = m.select_columns(x);
  EXPECT_EQ(sel.cols(), 2);
  EXPECT_EQ(sel.col(1), x.col(2));

  const ModelStructure k(Lattice(3, 3), kernel_spec(KernelKind::matern_half));
  EXPECT_EQ(k.parameter_count(), 2);
}

TEST(ModelStructure, InvalidParametersGiveMinusInfinity) {
  const ModelStructure m(Lattice(3, 3), sar_spec(Family::sar));
  const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(9, 2);
  const Eigen::VectorXd y = Eigen::VectorXd::Zero(9);
  EXPECT_EQ(log_density_gradient(m, Eigen::Vector4d(0, 0, 1.0, 1.0), x, y).value, minus_infinity);
  EXPECT_EQ(log_density_gradient(m, Eigen::Vector4d(0, 0, 0.5, -1.0), x, y).value, minus_infinity);
}

TEST(Models, EnumNames) {
  EXPECT_EQ(parse_family(to_string(Family::modified_sar)), Family::modified_sar);
  EXPECT_EQ(parse_kernel(to_string(KernelKind::exp_quadratic)), KernelKind::exp_quadratic);
  EXPECT_THROW(parse_family("car"), std::invalid_argument);
}
