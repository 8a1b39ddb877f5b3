#pragma once

#include "blockcv/gaussian.hpp"
#include "blockcv/lattice.hpp"

#include <Eigen/Dense>

#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace blockcv {

enum class Family { sar, modified_sar, kernel };
enum class KernelKind { matern_half, exp_quadratic };

std::string_view to_string(Family family);
std::string_view to_string(KernelKind kind);
Family parse_family(std::string_view name);
KernelKind parse_kernel(std::string_view name);

inline constexpr double minus_infinity = -std::numeric_limits<double>::infinity();

struct SarParams {
  Eigen::VectorXd beta;
  double rho = 0.0;
  double sigma2 = 1.0;
};

struct KernelParams {
  double lambda = 1.0;
  double sigma = 1.0;
};

/// Hyperparameters. Half-normal priors are parameterised by the variance of
/// the parent normal, so N+(0, 10) means variance 10.
struct PriorSpec {
  double beta_mean = 0.0;
  double beta_variance = 10.0;
  double rho_a = 2.0;
  double rho_b = 2.0;
  double sigma2_variance = 10.0;
  double lambda_variance = 1.0;
  double sigma_variance = 1.0;
};

enum class PriorKind { normal, beta, half_normal };

/// One scalar prior. Beta priors live on the interval (lo, hi).
struct ScalarPrior {
  PriorKind kind = PriorKind::normal;
  double a = 0.0;
  double b = 1.0;
  double lo = 0.0;
  double hi = 1.0;

  /// log density, or minus_infinity outside the support.
  double log_pdf(double x) const;
  double d_log_pdf(double x) const;
};

// Densities.

/// Standard SAR: (I - rho W) y = X beta + eps, eps ~ N(0, sigma2 I).
/// Mean (I - rho W)^{-1} X beta, precision (I - rho W)^T (I - rho W) / sigma2.
GaussianDensity sar_density(const AdjacencyMatrix& w, const Eigen::MatrixXd& x,
                            const SarParams& p);

/// Spatial-error SAR: mean X beta, same precision as sar_density.
GaussianDensity modified_sar_density(const AdjacencyMatrix& w, const Eigen::MatrixXd& x,
                                     const SarParams& p);

/// Kernel value at distance d without amplitude, i.e. K(d) / sigma^2.
double kernel_shape(KernelKind kind, double d, double lambda);
Eigen::MatrixXd kernel_matrix(KernelKind kind, const DistanceMatrix& d,
                              const KernelParams& p);

/// Diagonal jitter levels relative to sigma^2, tried in order.
inline constexpr double jitter_levels[] = {1e-8, 1e-7, 1e-6, 1e-5, 1e-4};

/// Zero-mean Gaussian field with covariance kernel_matrix + jitter.
GaussianDensity kernel_covariance(KernelKind kind, const DistanceMatrix& d,
                                  const KernelParams& p);

double log_prior(const SarParams& p, const PriorSpec& spec, double rho_lo = 0.0,
                 double rho_hi = 1.0);
double log_prior(const KernelParams& p, const PriorSpec& spec);

/// Eigenvalues of W (real for symmetric W and for row-standardised
/// symmetric W), ascending.
Eigen::VectorXd adjacency_spectrum(const AdjacencyMatrix& w);

/// Open interval of valid rho: (0, 1) for standardised weights, otherwise
/// (1 / lambda_min, 1 / lambda_max).
std::pair<double, double> rho_interval(const AdjacencyMatrix& w);

// Candidate models.

/// Fixed values for parameters that are not estimated.
struct ParameterClamp {
  std::optional<Eigen::VectorXd> beta;
  std::optional<double> rho;
  std::optional<double> sigma2;
  std::optional<double> lambda;
  std::optional<double> sigma;

  bool any() const { return beta || rho || sigma2 || lambda || sigma; }
};

struct ModelSpec {
  std::string name;
  Family family = Family::sar;
  Scheme scheme = Scheme::rook;
  int order = 1;
  bool standardized = true;
  KernelKind kernel = KernelKind::matern_half;
  /// Columns of the experiment design matrix the model sees.
  std::vector<int> columns;
  PriorSpec prior;
  ParameterClamp clamp;
};

enum class ParameterRole { coefficient, autoregressive, positive };

struct ParameterInfo {
  std::string name;
  ParameterRole role;
  ScalarPrior prior;
  double lo = 0.0; ///< support bounds for autoregressive parameters
  double hi = 1.0;
  std::optional<double> clamped;
};

/// A ModelSpec bound to a lattice: weights, spectrum and distances are
/// precomputed once and shared read-only.
class ModelStructure {
public:
  ModelStructure(const Lattice& lattice, ModelSpec spec);

  const ModelSpec& spec() const noexcept { return spec_; }
  const Lattice& lattice() const noexcept { return lattice_; }
  Index size() const noexcept { return lattice_.size(); }
  bool is_sar() const noexcept { return spec_.family != Family::kernel; }

  const AdjacencyMatrix& weights() const;
  const SparseMatrix& weights_transposed() const noexcept { return wt_; }
  const Eigen::VectorXd& spectrum() const noexcept { return spectrum_; }
  double rho_lo() const noexcept { return rho_lo_; }
  double rho_hi() const noexcept { return rho_hi_; }
  const DistanceMatrix& distance() const noexcept { return distance_; }

  /// Full constrained parameter list: beta..., rho, sigma2 (SAR) or
  /// lambda, sigma (kernel).
  const std::vector<ParameterInfo>& parameters() const noexcept { return params_; }
  Index parameter_count() const noexcept { return static_cast<Index>(params_.size()); }
  Index coefficient_count() const noexcept {
    return static_cast<Index>(spec_.columns.size());
  }

  /// The model's columns of the experiment design matrix.
  Eigen::MatrixXd select_columns(const Eigen::MatrixXd& x) const;

  /// Unpack a constrained parameter vector.
  SarParams sar_params(const Eigen::VectorXd& params) const;
  KernelParams kernel_params(const Eigen::VectorXd& params) const;

private:
  Lattice lattice_;
  ModelSpec spec_;
  std::optional<AdjacencyMatrix> w_;
  SparseMatrix wt_;
  Eigen::VectorXd spectrum_;
  double rho_lo_ = 0.0;
  double rho_hi_ = 1.0;
  DistanceMatrix distance_;
  std::vector<ParameterInfo> params_;
};

/// Dense GaussianDensity of the model at constrained parameters; `x` holds
/// the model's own columns.
GaussianDensity model_density(const ModelStructure& m, const Eigen::VectorXd& params,
                              const Eigen::MatrixXd& x);

struct DensityGradient {
  double value = minus_infinity;
  Eigen::VectorXd d_params;
  Eigen::VectorXd d_y;
};

/// log N(y | mu(params), Sigma(params)) and its gradient with respect to the
/// constrained parameters and to y. SAR families run in O(nnz) using the
/// cached spectrum for the log determinant. Returns value = -inf (no
/// gradient) when the parameters give a singular model.
DensityGradient log_density_gradient(const ModelStructure& m, const Eigen::VectorXd& params,
                                     const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                     bool want_gradient = true);

/// Conditional mean of y[missing] given the other coordinates of y.
/// Throws SingularModelError for singular parameters.
Eigen::VectorXd conditional_mode(const ModelStructure& m, const Eigen::VectorXd& params,
                                 const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                 const std::vector<Index>& missing);

} // namespace blockcv
