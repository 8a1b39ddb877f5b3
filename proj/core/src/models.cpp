#include "blockcv/models.hpp"

#include "blockcv/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>
#include <string>

namespace blockcv {

namespace {

constexpr double log_two_pi = 1.8378770664093454836;

Eigen::MatrixXd spatial_operator(const AdjacencyMatrix& w, double rho) {
  Eigen::MatrixXd a = -rho * w.dense();
  a.diagonal().array() += 1.0;
  return a;
}

void check_design(const AdjacencyMatrix& w, const Eigen::MatrixXd& x, const SarParams& p) {
  if (x.rows() != w.size())
    throw std::invalid_argument("design matrix has " + std::to_string(x.rows()) +
                                " rows, expected " + std::to_string(w.size()));
  if (x.cols() != p.beta.size())
    throw std::invalid_argument("beta length does not match design columns");
  if (!(p.sigma2 > 0.0))
    throw std::invalid_argument("sigma2 must be positive");
}

// Cholesky of K with escalating relative jitter. Returns the jitter level used.
double jittered_cholesky(Eigen::MatrixXd k, double sigma2, Eigen::LLT<Eigen::MatrixXd>& llt) {
  const Eigen::VectorXd base = k.diagonal();
  for (double level : jitter_levels) {
    k.diagonal() = base.array() + level * sigma2;
    llt.compute(k);
    if (llt.info() == Eigen::Success)
      return level;
  }
  throw SingularModelError("kernel covariance not positive definite after jitter escalation");
}

} // namespace

std::string_view to_string(Family family) {
  switch (family) {
  case Family::sar:
    return "sar";
  case Family::modified_sar:
    return "modified_sar";
  case Family::kernel:
    return "kernel";
  }
  return "unknown";
}

std::string_view to_string(KernelKind kind) {
  return kind == KernelKind::matern_half ? "matern_half" : "exp_quadratic";
}

Family parse_family(std::string_view name) {
  if (name == "sar")
    return Family::sar;
  if (name == "modified_sar")
    return Family::modified_sar;
  if (name == "kernel")
    return Family::kernel;
  throw std::invalid_argument("unknown model family '" + std::string(name) + "'");
}

KernelKind parse_kernel(std::string_view name) {
  if (name == "matern_half")
    return KernelKind::matern_half;
  if (name == "exp_quadratic")
    return KernelKind::exp_quadratic;
  throw std::invalid_argument("unknown kernel '" + std::string(name) + "'");
}

double ScalarPrior::log_pdf(double x) const {
  switch (kind) {
  case PriorKind::normal:
    return -0.5 * (log_two_pi + std::log(b)) - 0.5 * (x - a) * (x - a) / b;
  case PriorKind::beta: {
    if (!(x > lo && x < hi))
      return minus_infinity;
    const double width = hi - lo;
    const double u = (x - lo) / width;
    return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * std::log(u) +
           (b - 1.0) * std::log1p(-u) - std::log(width);
  }
  case PriorKind::half_normal:
    if (x < 0.0)
      return minus_infinity;
    return std::log(2.0) - 0.5 * (log_two_pi + std::log(b)) - 0.5 * x * x / b;
  }
  return minus_infinity;
}

double ScalarPrior::d_log_pdf(double x) const {
  switch (kind) {
  case PriorKind::normal:
    return -(x - a) / b;
  case PriorKind::beta: {
    const double width = hi - lo;
    const double u = (x - lo) / width;
    return ((a - 1.0) / u - (b - 1.0) / (1.0 - u)) / width;
  }
  case PriorKind::half_normal:
    return -x / b;
  }
  return 0.0;
}

GaussianDensity sar_density(const AdjacencyMatrix& w, const Eigen::MatrixXd& x,
                            const SarParams& p) {
  check_design(w, x, p);
  const Eigen::MatrixXd a = spatial_operator(w, p.rho);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  Eigen::VectorXd mean = lu.solve(x * p.beta);
  const Eigen::MatrixXd precision = (a.transpose() * a) / p.sigma2;
  return GaussianDensity::from_precision(std::move(mean), precision);
}

GaussianDensity modified_sar_density(const AdjacencyMatrix& w, const Eigen::MatrixXd& x,
                                     const SarParams& p) {
  check_design(w, x, p);
  const Eigen::MatrixXd a = spatial_operator(w, p.rho);
  const Eigen::MatrixXd precision = (a.transpose() * a) / p.sigma2;
  return GaussianDensity::from_precision(x * p.beta, precision);
}

double kernel_shape(KernelKind kind, double d, double lambda) {
  if (kind == KernelKind::matern_half)
    return std::exp(-d / lambda);
  return std::exp(-d * d / (2.0 * lambda * lambda));
}

Eigen::MatrixXd kernel_matrix(KernelKind kind, const DistanceMatrix& d, const KernelParams& p) {
  if (!(p.lambda > 0.0) || !(p.sigma > 0.0))
    throw std::invalid_argument("kernel parameters must be positive");
  const double s2 = p.sigma * p.sigma;
  Eigen::MatrixXd k(d.rows(), d.cols());
  for (Index j = 0; j < d.cols(); ++j)
    for (Index i = 0; i < d.rows(); ++i)
      k(i, j) = s2 * kernel_shape(kind, d(i, j), p.lambda);
  return k;
}

GaussianDensity kernel_covariance(KernelKind kind, const DistanceMatrix& d,
                                  const KernelParams& p) {
  Eigen::LLT<Eigen::MatrixXd> llt;
  jittered_cholesky(kernel_matrix(kind, d, p), p.sigma * p.sigma, llt);
  Eigen::MatrixXd l = llt.matrixL();
  return GaussianDensity::from_factor(Eigen::VectorXd::Zero(d.rows()), std::move(l),
                                      Shape::covariance);
}

double log_prior(const SarParams& p, const PriorSpec& spec, double rho_lo, double rho_hi) {
  const ScalarPrior beta{PriorKind::normal, spec.beta_mean, spec.beta_variance};
  const ScalarPrior rho{PriorKind::beta, spec.rho_a, spec.rho_b, rho_lo, rho_hi};
  const ScalarPrior sigma2{PriorKind::half_normal, 0.0, spec.sigma2_variance};
  double total = rho.log_pdf(p.rho) + sigma2.log_pdf(p.sigma2);
  for (Index i = 0; i < p.beta.size(); ++i)
    total += beta.log_pdf(p.beta(i));
  return total;
}

double log_prior(const KernelParams& p, const PriorSpec& spec) {
  const ScalarPrior lambda{PriorKind::half_normal, 0.0, spec.lambda_variance};
  const ScalarPrior sigma{PriorKind::half_normal, 0.0, spec.sigma_variance};
  return lambda.log_pdf(p.lambda) + sigma.log_pdf(p.sigma);
}

Eigen::VectorXd adjacency_spectrum(const AdjacencyMatrix& w) {
  // For W+ = D^{-1} W0 with W0 symmetric, sqrt(W+_ij W+_ji) = W0_ij / sqrt(d_i d_j),
  // a symmetric matrix similar to W+. For symmetric W it is W itself.
  const SparseMatrix& e = w.entries();
  const SparseMatrix et = e.transpose();
  const Index n = w.size();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (SparseMatrix::InnerIterator it(e, i); it; ++it) {
      const double mirror = et.coeff(i, it.col());
      s(i, it.col()) = std::sqrt(it.value() * mirror);
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(s, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw SingularModelError("eigenvalue decomposition of weights failed");
  return solver.eigenvalues();
}

std::pair<double, double> rho_interval(const AdjacencyMatrix& w) {
  if (w.standardized())
    return {0.0, 1.0};
  const Eigen::VectorXd ev = adjacency_spectrum(w);
  const double lo = ev(0);
  const double hi = ev(ev.size() - 1);
  if (!(lo < 0.0) || !(hi > 0.0))
    throw SingularModelError("weights spectrum does not straddle zero");
  return {1.0 / lo, 1.0 / hi};
}

// ModelStructure

ModelStructure::ModelStructure(const Lattice& lattice, ModelSpec spec)
    : lattice_(lattice), spec_(std::move(spec)) {
  const Index n = lattice_.size();
  if (spec_.family == Family::kernel) {
    if (!spec_.columns.empty())
      throw std::invalid_argument("kernel models take no covariates");
    distance_ = distances(lattice_);
    const ScalarPrior lambda{PriorKind::half_normal, 0.0, spec_.prior.lambda_variance};
    const ScalarPrior sigma{PriorKind::half_normal, 0.0, spec_.prior.sigma_variance};
    params_.push_back({"lambda", ParameterRole::positive, lambda, 0.0, 0.0, spec_.clamp.lambda});
    params_.push_back({"sigma", ParameterRole::positive, sigma, 0.0, 0.0, spec_.clamp.sigma});
    return;
  }

  AdjacencyMatrix raw = contiguity(lattice_, spec_.scheme, spec_.order);
  w_ = spec_.standardized ? row_standardize(raw) : raw;
  wt_ = w_->entries().transpose();
  spectrum_ = adjacency_spectrum(*w_);
  std::tie(rho_lo_, rho_hi_) = rho_interval(*w_);

  for (int c : spec_.columns)
    if (c < 0)
      throw std::invalid_argument("negative covariate column");
  if (spec_.clamp.beta && spec_.clamp.beta->size() != static_cast<Index>(spec_.columns.size()))
    throw std::invalid_argument("clamped beta length does not match columns");

  const ScalarPrior beta{PriorKind::normal, spec_.prior.beta_mean, spec_.prior.beta_variance};
  for (std::size_t j = 0; j < spec_.columns.size(); ++j) {
    std::optional<double> clamp;
    if (spec_.clamp.beta)
      clamp = (*spec_.clamp.beta)(static_cast<Index>(j));
    params_.push_back(
        {"beta" + std::to_string(j), ParameterRole::coefficient, beta, 0.0, 0.0, clamp});
  }
  const ScalarPrior rho{PriorKind::beta, spec_.prior.rho_a, spec_.prior.rho_b, rho_lo_, rho_hi_};
  params_.push_back({"rho", ParameterRole::autoregressive, rho, rho_lo_, rho_hi_, spec_.clamp.rho});
  const ScalarPrior sigma2{PriorKind::half_normal, 0.0, spec_.prior.sigma2_variance};
  params_.push_back({"sigma2", ParameterRole::positive, sigma2, 0.0, 0.0, spec_.clamp.sigma2});
  (void)n;
}

const AdjacencyMatrix& ModelStructure::weights() const {
  if (!w_)
    throw std::logic_error("kernel models have no weights matrix");
  return *w_;
}

Eigen::MatrixXd ModelStructure::select_columns(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd out(size(), static_cast<Index>(spec_.columns.size()));
  for (std::size_t j = 0; j < spec_.columns.size(); ++j) {
    const int c = spec_.columns[j];
    if (c >= x.cols())
      throw std::invalid_argument("model column " + std::to_string(c) +
                                  " exceeds design width " + std::to_string(x.cols()));
    out.col(static_cast<Index>(j)) = x.col(c);
  }
  return out;
}

SarParams ModelStructure::sar_params(const Eigen::VectorXd& params) const {
  const Index k = coefficient_count();
  if (params.size() != k + 2)
    throw std::invalid_argument("SAR parameter vector has wrong length");
  return {params.head(k), params(k), params(k + 1)};
}

KernelParams ModelStructure::kernel_params(const Eigen::VectorXd& params) const {
  if (params.size() != 2)
    throw std::invalid_argument("kernel parameter vector has wrong length");
  return {params(0), params(1)};
}

GaussianDensity model_density(const ModelStructure& m, const Eigen::VectorXd& params,
                              const Eigen::MatrixXd& x) {
  switch (m.spec().family) {
  case Family::sar:
    return sar_density(m.weights(), x, m.sar_params(params));
  case Family::modified_sar:
    return modified_sar_density(m.weights(), x, m.sar_params(params));
  case Family::kernel:
    return kernel_covariance(m.spec().kernel, m.distance(), m.kernel_params(params));
  }
  throw std::logic_error("unreachable");
}

namespace {

DensityGradient sar_gradient(const ModelStructure& m, const Eigen::VectorXd& params,
                             const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             bool want_gradient) {
  const SarParams p = m.sar_params(params);
  DensityGradient out;
  if (!(p.sigma2 > 0.0) || !std::isfinite(p.sigma2) || !(p.rho < m.rho_hi()))
    return out;
  // rho_hi is 1 / max eigenvalue (exactly 1 when standardised); the loop
  // below catches the lower end.
  const Eigen::VectorXd& omega = m.spectrum();
  double log_det_a = 0.0;
  for (Index i = 0; i < omega.size(); ++i) {
    const double f = 1.0 - p.rho * omega(i);
    if (!(f > 0.0))
      return out;
    log_det_a += std::log(f);
  }
  const SparseMatrix& w = m.weights().entries();
  const bool modified = m.spec().family == Family::modified_sar;
  const Eigen::VectorXd xb = x * p.beta;
  // e = A v - c with v = y (SAR) or y - X beta (modified), c = X beta or 0.
  const Eigen::VectorXd v = modified ? Eigen::VectorXd(y - xb) : y;
  const Eigen::VectorXd wv = w * v;
  Eigen::VectorXd e = v - p.rho * wv;
  if (!modified)
    e -= xb;
  const double n = static_cast<double>(y.size());
  const double ss = e.squaredNorm();
  out.value = -0.5 * n * log_two_pi + log_det_a - 0.5 * n * std::log(p.sigma2) -
              0.5 * ss / p.sigma2;
  if (!want_gradient)
    return out;

  const Index k = m.coefficient_count();
  const Eigen::VectorXd ate = e - p.rho * (m.weights_transposed() * e); // A^T e
  out.d_y = -ate / p.sigma2;
  out.d_params.resize(k + 2);
  out.d_params.head(k) = (modified ? Eigen::VectorXd(x.transpose() * ate)
                                   : Eigen::VectorXd(x.transpose() * e)) /
                         p.sigma2;
  double d_log_det = 0.0;
  for (Index i = 0; i < omega.size(); ++i)
    d_log_det -= omega(i) / (1.0 - p.rho * omega(i));
  out.d_params(k) = d_log_det + e.dot(wv) / p.sigma2;
  out.d_params(k + 1) = -0.5 * n / p.sigma2 + 0.5 * ss / (p.sigma2 * p.sigma2);
  return out;
}

DensityGradient kernel_gradient(const ModelStructure& m, const Eigen::VectorXd& params,
                                const Eigen::VectorXd& y, bool want_gradient) {
  const KernelParams p = m.kernel_params(params);
  DensityGradient out;
  if (!(p.lambda > 0.0) || !(p.sigma > 0.0) || !std::isfinite(p.lambda) ||
      !std::isfinite(p.sigma))
    return out;
  const DistanceMatrix& d = m.distance();
  const KernelKind kind = m.spec().kernel;
  const Eigen::MatrixXd k = kernel_matrix(kind, d, p);
  Eigen::LLT<Eigen::MatrixXd> llt;
  try {
    jittered_cholesky(k, p.sigma * p.sigma, llt);
  } catch (const SingularModelError&) {
    return out;
  }
  const Eigen::MatrixXd& lower = llt.matrixLLT();
  double log_det = 0.0;
  for (Index i = 0; i < lower.rows(); ++i)
    log_det += 2.0 * std::log(lower(i, i));
  const Eigen::VectorXd alpha = llt.solve(y);
  const double n = static_cast<double>(y.size());
  const double quad = y.dot(alpha);
  out.value = -0.5 * n * log_two_pi - 0.5 * log_det - 0.5 * quad;
  if (!want_gradient)
    return out;

  out.d_y = -alpha;
  out.d_params.resize(2);
  // K = sigma^2 (k(d / lambda) + c I), so dK/dsigma = 2 K / sigma.
  out.d_params(1) = (quad - n) / p.sigma;
  // dK/dlambda = sigma^2 * dk/dlambda, zero on the diagonal.
  const Eigen::MatrixXd kinv = llt.solve(Eigen::MatrixXd::Identity(k.rows(), k.cols()));
  double trace = 0.0;
  double quad_dk = 0.0;
  const double l2 = p.lambda * p.lambda;
  for (Index j = 0; j < k.cols(); ++j) {
    for (Index i = 0; i < k.rows(); ++i) {
      const double dij = d(i, j);
      const double dk = kind == KernelKind::matern_half ? k(i, j) * dij / l2
                                                        : k(i, j) * dij * dij / (l2 * p.lambda);
      trace += kinv(i, j) * dk;
      quad_dk += alpha(i) * dk * alpha(j);
    }
  }
  out.d_params(0) = 0.5 * quad_dk - 0.5 * trace;
  return out;
}

} // namespace

DensityGradient log_density_gradient(const ModelStructure& m, const Eigen::VectorXd& params,
                                     const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                     bool want_gradient) {
  if (y.size() != m.size())
    throw std::invalid_argument("observation vector does not match lattice size");
  if (m.is_sar())
    return sar_gradient(m, params, x, y, want_gradient);
  return kernel_gradient(m, params, y, want_gradient);
}

Eigen::VectorXd conditional_mode(const ModelStructure& m, const Eigen::VectorXd& params,
                                 const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                 const std::vector<Index>& missing) {
  const Index n = m.size();
  const Index nm = static_cast<Index>(missing.size());
  if (nm == 0)
    return {};
  std::vector<char> is_missing(static_cast<std::size_t>(n), 0);
  for (Index i : missing) {
    if (i < 0 || i >= n || is_missing[i])
      throw std::invalid_argument("invalid missing index set");
    is_missing[i] = 1;
  }

  if (m.is_sar()) {
    // Minimise ||A y - c||^2 over y[missing]: (A_M^T A_M) y_M = -A_M^T (A y0 - c).
    const SarParams p = m.sar_params(params);
    const bool modified = m.spec().family == Family::modified_sar;
    const SparseMatrix& w = m.weights().entries();
    const SparseMatrix& wt = m.weights_transposed();
    Eigen::VectorXd y0 = y;
    for (Index i : missing)
      y0(i) = 0.0;
    const Eigen::VectorXd xb = x * p.beta;
    Eigen::VectorXd c = xb;
    if (modified)
      c = xb - p.rho * (w * xb);
    const Eigen::VectorXd b = y0 - p.rho * (w * y0) - c;
    Eigen::MatrixXd am = Eigen::MatrixXd::Zero(n, nm);
    for (Index j = 0; j < nm; ++j) {
      const Index col = missing[j];
      am(col, j) += 1.0;
      for (SparseMatrix::InnerIterator it(wt, col); it; ++it)
        am(it.col(), j) -= p.rho * it.value();
    }
    Eigen::LLT<Eigen::MatrixXd> llt(am.transpose() * am);
    if (llt.info() != Eigen::Success)
      throw SingularModelError("spatial operator is singular on the missing block");
    return llt.solve(-(am.transpose() * b));
  }

  // Kernel: y_M = K_MO K_OO^{-1} y_O.
  const KernelParams p = m.kernel_params(params);
  std::vector<Index> observed;
  observed.reserve(static_cast<std::size_t>(n - nm));
  for (Index i = 0; i < n; ++i)
    if (!is_missing[i])
      observed.push_back(i);
  const Index no = static_cast<Index>(observed.size());
  if (no == 0)
    return Eigen::VectorXd::Zero(nm);
  const Eigen::MatrixXd k = kernel_matrix(m.spec().kernel, m.distance(), p);
  Eigen::LLT<Eigen::MatrixXd> full;
  const double level = jittered_cholesky(k, p.sigma * p.sigma, full);
  const double jitter = level * p.sigma * p.sigma;
  Eigen::MatrixXd koo(no, no);
  Eigen::MatrixXd kmo(nm, no);
  Eigen::VectorXd yo(no);
  for (Index a = 0; a < no; ++a) {
    yo(a) = y(observed[a]);
    for (Index b = 0; b < no; ++b)
      koo(a, b) = k(observed[a], observed[b]);
    koo(a, a) += jitter;
    for (Index r = 0; r < nm; ++r)
      kmo(r, a) = k(missing[r], observed[a]);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(koo);
  if (llt.info() != Eigen::Success)
    throw SingularModelError("observed kernel block is singular");
  return kmo * llt.solve(yo);
}

} // namespace blockcv
