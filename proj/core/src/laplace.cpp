#include "blockcv/laplace.hpp"

#include "blockcv/errors.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace blockcv {

namespace {

double softplus(double u) {
  return u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
}

double sigmoid(double u) {
  if (u >= 0.0)
    return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

} // namespace

double Transform::forward(double u) const {
  switch (kind) {
  case TransformKind::identity:
    return u;
  case TransformKind::scaled_sigmoid:
    return lo + (hi - lo) * sigmoid(u);
  case TransformKind::softplus:
    return softplus(u);
  }
  return nan;
}

double Transform::inverse(double x) const {
  switch (kind) {
  case TransformKind::identity:
    return x;
  case TransformKind::scaled_sigmoid: {
    const double t = (x - lo) / (hi - lo);
    return std::log(t) - std::log1p(-t);
  }
  case TransformKind::softplus:
    // log(exp(x) - 1), stable for small and large x.
    return x + std::log(-std::expm1(-x));
  }
  return nan;
}

double Transform::derivative(double u) const {
  switch (kind) {
  case TransformKind::identity:
    return 1.0;
  case TransformKind::scaled_sigmoid: {
    const double s = sigmoid(u);
    return (hi - lo) * s * (1.0 - s);
  }
  case TransformKind::softplus:
    return sigmoid(u);
  }
  return nan;
}

double Transform::log_jacobian(double u) const {
  switch (kind) {
  case TransformKind::identity:
    return 0.0;
  case TransformKind::scaled_sigmoid:
    return std::log(hi - lo) - softplus(-u) - softplus(u);
  case TransformKind::softplus:
    return -softplus(-u);
  }
  return nan;
}

double Transform::d_log_jacobian(double u) const {
  switch (kind) {
  case TransformKind::identity:
    return 0.0;
  case TransformKind::scaled_sigmoid:
    return 1.0 - 2.0 * sigmoid(u);
  case TransformKind::softplus:
    return 1.0 - sigmoid(u);
  }
  return nan;
}

Transform transform_for(const ParameterInfo& p) {
  switch (p.role) {
  case ParameterRole::coefficient:
    return {TransformKind::identity};
  case ParameterRole::autoregressive:
    return {TransformKind::scaled_sigmoid, p.lo, p.hi};
  case ParameterRole::positive:
    return {TransformKind::softplus};
  }
  throw std::logic_error("unreachable");
}

// JointObjective

JointObjective::JointObjective(const ModelStructure& model, const Fold& fold,
                               const Eigen::VectorXd& y, const Eigen::MatrixXd& x)
    : model_(model), y_(y), x_(model.select_columns(x)) {
  validate_fold(fold, model.size());
  if (y.size() != model.size())
    throw std::invalid_argument("observations do not match the lattice");
  missing_.reserve(fold.buffer.size() + fold.test.size());
  missing_.insert(missing_.end(), fold.buffer.begin(), fold.buffer.end());
  missing_.insert(missing_.end(), fold.test.begin(), fold.test.end());
  for (Index i : missing_)
    y_(i) = nan;
  double sum = 0.0;
  for (Index i : fold.train)
    sum += y(i);
  train_mean_ = sum / static_cast<double>(fold.train.size());

  const auto& params = model.parameters();
  clamped_.resize(static_cast<Index>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].clamped) {
      clamped_(static_cast<Index>(i)) = *params[i].clamped;
    } else {
      clamped_(static_cast<Index>(i)) = nan;
      free_.push_back(static_cast<Index>(i));
      transforms_.push_back(transform_for(params[i]));
    }
  }
  layout_ = {static_cast<Index>(free_.size()), static_cast<Index>(fold.buffer.size()),
             static_cast<Index>(fold.test.size())};
}

Eigen::VectorXd JointObjective::constrained(const Eigen::VectorXd& theta_u) const {
  if (theta_u.size() != parameter_dim())
    throw std::invalid_argument("parameter vector has wrong length");
  Eigen::VectorXd p = clamped_;
  for (std::size_t i = 0; i < free_.size(); ++i)
    p(free_[i]) = transforms_[i].forward(theta_u(static_cast<Index>(i)));
  return p;
}

Eigen::VectorXd JointObjective::unconstrained(const Eigen::VectorXd& params) const {
  Eigen::VectorXd u(parameter_dim());
  for (std::size_t i = 0; i < free_.size(); ++i)
    u(static_cast<Index>(i)) = transforms_[i].inverse(params(free_[i]));
  return u;
}

Eigen::VectorXd JointObjective::fill(const Eigen::VectorXd& y_missing) const {
  Eigen::VectorXd y = y_;
  for (std::size_t i = 0; i < missing_.size(); ++i)
    y(missing_[i]) = y_missing(static_cast<Index>(i));
  return y;
}

double JointObjective::value(const Eigen::VectorXd& theta_u,
                             const Eigen::VectorXd& y_missing) const {
  Eigen::VectorXd z(parameter_dim() + missing_dim());
  z << theta_u, y_missing;
  return evaluate(z, nullptr);
}

double JointObjective::evaluate(const Eigen::VectorXd& z, Eigen::VectorXd* grad) const {
  const Index p = parameter_dim();
  const Index m = missing_dim();
  if (z.size() != p + m)
    throw std::invalid_argument("joint vector has wrong length");
  if (grad)
    grad->setZero(p + m);
  if (!z.allFinite())
    return minus_infinity;

  const Eigen::VectorXd theta_u = z.head(p);
  const Eigen::VectorXd params = constrained(theta_u);
  const auto& info = model_.parameters();
  double total = 0.0;
  for (std::size_t i = 0; i < free_.size(); ++i) {
    const double xi = params(free_[i]);
    const double lp = info[static_cast<std::size_t>(free_[i])].prior.log_pdf(xi);
    if (!std::isfinite(lp) || !std::isfinite(xi))
      return minus_infinity;
    total += lp + transforms_[i].log_jacobian(theta_u(static_cast<Index>(i)));
  }

  const Eigen::VectorXd y = fill(z.tail(m));
  const DensityGradient dg = log_density_gradient(model_, params, x_, y, grad != nullptr);
  if (!std::isfinite(dg.value))
    return minus_infinity;
  total += dg.value;

  if (grad) {
    for (std::size_t i = 0; i < free_.size(); ++i) {
      const Index k = free_[i];
      const double u = theta_u(static_cast<Index>(i));
      const Transform& t = transforms_[i];
      const double d_x = dg.d_params(k) + info[static_cast<std::size_t>(k)].prior.d_log_pdf(params(k));
      (*grad)(static_cast<Index>(i)) = d_x * t.derivative(u) + t.d_log_jacobian(u);
    }
    for (Index j = 0; j < m; ++j)
      (*grad)(p + j) = dg.d_y(missing_[static_cast<std::size_t>(j)]);
  }
  return total;
}

Eigen::VectorXd JointObjective::impute(const Eigen::VectorXd& theta_u) const {
  const Eigen::VectorXd params = constrained(theta_u);
  const Eigen::VectorXd y = fill(Eigen::VectorXd::Zero(missing_dim()));
  return conditional_mode(model_, params, x_, y, missing_);
}

double JointObjective::profile(const Eigen::VectorXd& theta_u, Eigen::VectorXd* grad) const {
  const Index p = parameter_dim();
  if (grad)
    grad->setZero(p);
  if (!theta_u.allFinite())
    return minus_infinity;
  Eigen::VectorXd y_m;
  try {
    y_m = impute(theta_u);
  } catch (const SingularModelError&) {
    return minus_infinity;
  }
  Eigen::VectorXd z(p + missing_dim());
  z << theta_u, y_m;
  Eigen::VectorXd g;
  const double v = evaluate(z, grad ? &g : nullptr);
  // Envelope theorem: the missing-block gradient vanishes at the imputation.
  if (grad && std::isfinite(v))
    *grad = g.head(p);
  return v;
}

Eigen::VectorXd JointObjective::initial_theta() const {
  Eigen::VectorXd u(parameter_dim());
  const auto& info = model_.parameters();
  for (std::size_t i = 0; i < free_.size(); ++i) {
    const ParameterInfo& pi = info[static_cast<std::size_t>(free_[i])];
    double x0 = 0.0;
    switch (pi.role) {
    case ParameterRole::coefficient:
      x0 = 0.0;
      break;
    case ParameterRole::autoregressive:
      x0 = 0.5 * (pi.lo + pi.hi);
      break;
    case ParameterRole::positive:
      x0 = 1.0;
      break;
    }
    u(static_cast<Index>(i)) = transforms_[i].inverse(x0);
  }
  return u;
}

Eigen::VectorXd JointObjective::initial_missing() const {
  return Eigen::VectorXd::Constant(missing_dim(), train_mean_);
}

Objective JointObjective::joint_function() const {
  return [this](const Eigen::VectorXd& z, Eigen::VectorXd* g) { return evaluate(z, g); };
}

Objective JointObjective::profile_function() const {
  return [this](const Eigen::VectorXd& t, Eigen::VectorXd* g) { return profile(t, g); };
}

// Fitting

LaplaceResult fit_map(const Objective& objective, Eigen::VectorXd init,
                      const OptimizerOptions& opts, BlockLayout layout) {
  if (!init.allFinite())
    throw std::invalid_argument("fit_map: initial point is not finite");
  if (layout.size() != init.size())
    throw std::invalid_argument("fit_map: layout does not match initial point");
  const OptimizationResult opt = maximize(objective, std::move(init), opts);
  LaplaceResult r;
  r.map_point = opt.x;
  r.layout = layout;
  r.objective_value = opt.value;
  r.gradient_norm = opt.gradient_norm;
  r.iterations = opt.iterations;
  r.evaluations = opt.evaluations;
  r.attempts = 1;
  r.converged = opt.converged;
  if (r.converged) {
    try {
      r.hessian = negative_hessian(objective, r.map_point, opts.hessian_step);
    } catch (const DegenerateCurvatureError&) {
      r.converged = false;
    }
  }
  return r;
}

namespace {

LaplaceResult finish(const JointObjective& obj, const OptimizationResult& opt,
                     const OptimizerOptions& opts) {
  LaplaceResult r;
  r.layout = obj.layout();
  r.iterations = opt.iterations;
  r.evaluations = opt.evaluations;
  if (!opt.converged)
    return r;
  Eigen::VectorXd y_m;
  try {
    y_m = obj.impute(opt.x);
  } catch (const SingularModelError&) {
    return r;
  }
  r.map_point.resize(obj.parameter_dim() + obj.missing_dim());
  r.map_point << opt.x, y_m;
  Eigen::VectorXd g;
  r.objective_value = obj.evaluate(r.map_point, &g);
  if (!std::isfinite(r.objective_value))
    return r;
  r.gradient_norm = g.size() ? g.lpNorm<Eigen::Infinity>() : 0.0;
  r.converged = r.gradient_norm < opts.gradient_tolerance;
  if (r.converged) {
    try {
      r.hessian = negative_hessian(obj.joint_function(), r.map_point, opts.hessian_step);
    } catch (const DegenerateCurvatureError&) {
      r.converged = false;
    }
  }
  return r;
}

} // namespace

LaplaceResult fit_fold(const JointObjective& obj, const LaplaceOptions& opts, Stream* retry) {
  const Eigen::VectorXd theta0 = obj.initial_theta();
  const int attempts = 1 + (retry ? std::max(0, opts.retries) : 0);
  LaplaceResult best;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    Eigen::VectorXd start = theta0;
    if (attempt > 0) {
      std::normal_distribution<double> normal(0.0, 1.0);
      for (Index i = 0; i < start.size(); ++i)
        start(i) += opts.perturbation * normal(*retry);
    }
    LaplaceResult r;
    if (opts.profile) {
      const OptimizationResult opt = maximize(obj.profile_function(), start, opts.optimizer);
      r = finish(obj, opt, opts.optimizer);
    }
    if (!r.converged) {
      Eigen::VectorXd z(obj.parameter_dim() + obj.missing_dim());
      z << start, obj.initial_missing();
      LaplaceResult joint = fit_map(obj.joint_function(), z, opts.optimizer, obj.layout());
      joint.iterations += r.iterations;
      joint.evaluations += r.evaluations;
      r = std::move(joint);
    }
    r.attempts = attempt + 1;
    if (r.converged)
      return r;
    best = std::move(r);
  }
  return best;
}

PredictiveBlock predictive_block(const LaplaceResult& result) {
  if (!result.converged)
    throw std::invalid_argument("predictive_block: Laplace fit did not converge");
  const BlockLayout& lay = result.layout;
  const Index d = lay.size();
  if (result.hessian.rows() != d || result.hessian.cols() != d)
    throw std::invalid_argument("predictive_block: Hessian does not match layout");
  if (lay.test < 1)
    throw std::invalid_argument("predictive_block: empty test block");
  Eigen::LLT<Eigen::MatrixXd> llt(result.hessian);
  if (llt.info() != Eigen::Success)
    throw DegenerateCurvatureError("negative Hessian is not positive definite");
  const Index offset = d - lay.test;
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(d, lay.test);
  for (Index j = 0; j < lay.test; ++j)
    rhs(offset + j, j) = 1.0;
  const Eigen::MatrixXd cols = llt.solve(rhs);
  Eigen::MatrixXd cov = cols.bottomRows(lay.test);
  cov = 0.5 * (cov + cov.transpose()).eval();
  try {
    return {GaussianDensity::from_covariance(result.test_values(), cov)};
  } catch (const SingularModelError&) {
    throw DegenerateCurvatureError("predictive covariance is not positive definite");
  }
}

std::string to_json(const LaplaceResult& r) {
  const auto number = [](double v, const char* spec) {
    return std::isfinite(v) ? fmt::format(fmt::runtime(spec), v) : std::string("null");
  };
  return fmt::format(
      R"({{"iterations":{},"evaluations":{},"attempts":{},"gradient_norm":{},"objective":{},"converged":{}}})",
      r.iterations, r.evaluations, r.attempts, number(r.gradient_norm, "{:.6g}"),
      number(r.objective_value, "{:.17g}"), r.converged ? "true" : "false");
}

} // namespace blockcv
