#pragma once

#include "blockcv/lattice.hpp"
#include "blockcv/random.hpp"

#include <Eigen/Dense>

#include <span>

namespace blockcv {

enum class Shape { covariance, precision };

/// Multivariate normal stored as a mean plus the lower Cholesky factor of
/// either its covariance or its precision.
class GaussianDensity {
public:
  /// Throws SingularModelError if `covariance` is not positive definite.
  static GaussianDensity from_covariance(Eigen::VectorXd mean,
                                         const Eigen::MatrixXd& covariance);
  static GaussianDensity from_precision(Eigen::VectorXd mean,
                                        const Eigen::MatrixXd& precision);
  /// Wraps an existing lower factor; diagonal must be strictly positive.
  static GaussianDensity from_factor(Eigen::VectorXd mean, Eigen::MatrixXd lower,
                                     Shape shape);

  Index dim() const noexcept { return mean_.size(); }
  const Eigen::VectorXd& mean() const noexcept { return mean_; }
  Shape shape() const noexcept { return shape_; }
  const Eigen::MatrixXd& factor() const noexcept { return factor_; }
  /// log det of the stored matrix (covariance or precision, per shape).
  double log_det() const noexcept { return log_det_; }

  Eigen::MatrixXd covariance() const;
  Eigen::MatrixXd precision() const;

  /// Same density over the coordinates in `order` (new i = old order[i]).
  GaussianDensity permuted(std::span<const Index> order) const;
  /// Marginal over a subset of coordinates, returned in covariance shape.
  GaussianDensity marginal(std::span<const Index> keep) const;
  /// Law of the `keep` coordinates given the `given` coordinates equal
  /// `values` (Schur complement).
  GaussianDensity conditional(std::span<const Index> keep, std::span<const Index> given,
                              const Eigen::VectorXd& values) const;

private:
  GaussianDensity(Eigen::VectorXd mean, Eigen::MatrixXd factor, Shape shape);

  Eigen::VectorXd mean_;
  Eigen::MatrixXd factor_;
  Shape shape_;
  double log_det_;
};

double log_density(const GaussianDensity& g, const Eigen::VectorXd& y);

/// y = mean + L z (covariance) or mean + L^{-T} z (precision), z ~ N(0, I).
Eigen::VectorXd simulate(const GaussianDensity& g, Stream& rng);

/// Univariate normal log density.
double normal_log_density(double y, double mean, double variance);

} // namespace blockcv
