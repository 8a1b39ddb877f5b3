#include "blockcv/gaussian.hpp"

#include "blockcv/errors.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace blockcv {

namespace {

constexpr double log_two_pi = 1.8378770664093454836;

Eigen::MatrixXd lower_cholesky(const Eigen::MatrixXd& m, const char* what) {
  if (m.rows() != m.cols())
    throw std::invalid_argument(std::string(what) + " must be square");
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw SingularModelError(std::string(what) + " is not positive definite");
  Eigen::MatrixXd l = llt.matrixL();
  return l;
}

Eigen::MatrixXd gather(const Eigen::MatrixXd& m, std::span<const Index> rows,
                       std::span<const Index> cols) {
  Eigen::MatrixXd out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (Index i = 0; i < out.rows(); ++i)
    for (Index j = 0; j < out.cols(); ++j)
      out(i, j) = m(rows[i], cols[j]);
  return out;
}

Eigen::VectorXd gather(const Eigen::VectorXd& v, std::span<const Index> idx) {
  Eigen::VectorXd out(static_cast<Index>(idx.size()));
  for (Index i = 0; i < out.size(); ++i)
    out(i) = v(idx[i]);
  return out;
}

void check_indices(std::span<const Index> idx, Index n) {
  for (Index i : idx)
    if (i < 0 || i >= n)
      throw std::invalid_argument("coordinate index out of range");
}

} // namespace

GaussianDensity::GaussianDensity(Eigen::VectorXd mean, Eigen::MatrixXd factor, Shape shape)
    : mean_(std::move(mean)), factor_(std::move(factor)), shape_(shape) {
  if (factor_.rows() != mean_.size() || factor_.cols() != mean_.size())
    throw std::invalid_argument("factor dimension does not match mean");
  log_det_ = 0.0;
  for (Index i = 0; i < factor_.rows(); ++i) {
    const double d = factor_(i, i);
    if (!(d > 0.0) || !std::isfinite(d))
      throw SingularModelError("Cholesky factor has a non-positive diagonal");
    log_det_ += 2.0 * std::log(d);
  }
}

GaussianDensity GaussianDensity::from_covariance(Eigen::VectorXd mean,
                                                 const Eigen::MatrixXd& covariance) {
  return GaussianDensity(std::move(mean), lower_cholesky(covariance, "covariance"),
                         Shape::covariance);
}

GaussianDensity GaussianDensity::from_precision(Eigen::VectorXd mean,
                                                const Eigen::MatrixXd& precision) {
  return GaussianDensity(std::move(mean), lower_cholesky(precision, "precision"),
                         Shape::precision);
}

GaussianDensity GaussianDensity::from_factor(Eigen::VectorXd mean, Eigen::MatrixXd lower,
                                             Shape shape) {
  lower.triangularView<Eigen::StrictlyUpper>().setZero();
  return GaussianDensity(std::move(mean), std::move(lower), shape);
}

Eigen::MatrixXd GaussianDensity::covariance() const {
  if (shape_ == Shape::covariance)
    return factor_ * factor_.transpose();
  // (L L^T)^{-1} = L^{-T} L^{-1}
  Eigen::MatrixXd linv = Eigen::MatrixXd::Identity(dim(), dim());
  factor_.triangularView<Eigen::Lower>().solveInPlace(linv);
  return linv.transpose() * linv;
}

Eigen::MatrixXd GaussianDensity::precision() const {
  if (shape_ == Shape::precision)
    return factor_ * factor_.transpose();
  Eigen::MatrixXd linv = Eigen::MatrixXd::Identity(dim(), dim());
  factor_.triangularView<Eigen::Lower>().solveInPlace(linv);
  return linv.transpose() * linv;
}

GaussianDensity GaussianDensity::permuted(std::span<const Index> order) const {
  if (static_cast<Index>(order.size()) != dim())
    throw std::invalid_argument("permutation length does not match dimension");
  check_indices(order, dim());
  const Eigen::MatrixXd full = shape_ == Shape::covariance ? covariance() : precision();
  Eigen::MatrixXd p = gather(full, order, order);
  if (shape_ == Shape::covariance)
    return from_covariance(gather(mean_, order), p);
  return from_precision(gather(mean_, order), p);
}

GaussianDensity GaussianDensity::marginal(std::span<const Index> keep) const {
  check_indices(keep, dim());
  return from_covariance(gather(mean_, keep), gather(covariance(), keep, keep));
}

GaussianDensity GaussianDensity::conditional(std::span<const Index> keep,
                                             std::span<const Index> given,
                                             const Eigen::VectorXd& values) const {
  check_indices(keep, dim());
  check_indices(given, dim());
  if (values.size() != static_cast<Index>(given.size()))
    throw std::invalid_argument("conditioning values do not match index set");
  const Eigen::MatrixXd sigma = covariance();
  const Eigen::MatrixXd s_kk = gather(sigma, keep, keep);
  if (given.empty())
    return from_covariance(gather(mean_, keep), s_kk);
  const Eigen::MatrixXd s_kg = gather(sigma, keep, given);
  const Eigen::MatrixXd s_gg = gather(sigma, given, given);
  Eigen::LLT<Eigen::MatrixXd> llt(s_gg);
  if (llt.info() != Eigen::Success)
    throw SingularModelError("conditioning block is not positive definite");
  const Eigen::VectorXd resid = values - gather(mean_, given);
  Eigen::VectorXd mu = gather(mean_, keep) + s_kg * llt.solve(resid);
  Eigen::MatrixXd cov = s_kk - s_kg * llt.solve(s_kg.transpose());
  cov = 0.5 * (cov + cov.transpose()).eval();
  return from_covariance(std::move(mu), cov);
}

double log_density(const GaussianDensity& g, const Eigen::VectorXd& y) {
  if (y.size() != g.dim())
    throw std::invalid_argument("log_density: dimension mismatch (" +
                                std::to_string(y.size()) + " vs " +
                                std::to_string(g.dim()) + ")");
  const Eigen::VectorXd r = y - g.mean();
  const double n = static_cast<double>(g.dim());
  if (g.shape() == Shape::covariance) {
    const Eigen::VectorXd w = g.factor().triangularView<Eigen::Lower>().solve(r);
    return -0.5 * n * log_two_pi - 0.5 * g.log_det() - 0.5 * w.squaredNorm();
  }
  const Eigen::VectorXd w = g.factor().transpose().triangularView<Eigen::Upper>() * r;
  return -0.5 * n * log_two_pi + 0.5 * g.log_det() - 0.5 * w.squaredNorm();
}

Eigen::VectorXd simulate(const GaussianDensity& g, Stream& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(g.dim());
  for (Index i = 0; i < z.size(); ++i)
    z(i) = normal(rng);
  if (g.shape() == Shape::covariance)
    return g.mean() + g.factor().triangularView<Eigen::Lower>() * z;
  g.factor().transpose().triangularView<Eigen::Upper>().solveInPlace(z);
  return g.mean() + z;
}

double normal_log_density(double y, double mean, double variance) {
  const double r = y - mean;
  return -0.5 * (log_two_pi + std::log(variance)) - 0.5 * r * r / variance;
}

} // namespace blockcv
