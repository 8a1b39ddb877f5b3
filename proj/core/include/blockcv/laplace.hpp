#pragma once

#include "blockcv/cvdesign.hpp"
#include "blockcv/gaussian.hpp"
#include "blockcv/models.hpp"
#include "blockcv/optimize.hpp"
#include "blockcv/random.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace blockcv {

enum class TransformKind { identity, scaled_sigmoid, softplus };

/// Bijection from the real line onto a parameter's support.
struct Transform {
  TransformKind kind = TransformKind::identity;
  double lo = 0.0; ///< scaled_sigmoid target interval
  double hi = 1.0;

  double forward(double u) const;    ///< unconstrained -> constrained
  double inverse(double x) const;    ///< constrained -> unconstrained
  double derivative(double u) const; ///< dx/du
  double log_jacobian(double u) const;
  double d_log_jacobian(double u) const;
};

Transform transform_for(const ParameterInfo& p);

/// Sizes of the (parameters, buffer, test) blocks of a joint MAP vector.
struct BlockLayout {
  Index parameters = 0;
  Index buffer = 0;
  Index test = 0;

  Index size() const noexcept { return parameters + buffer + test; }
};

/// Joint log density of unconstrained parameters and the held-out
/// (buffer, test) observations for one fold:
///   log p(theta) + log|J| + log N(y_train, y_buffer*, y_test* | mu, Sigma).
/// Clamped parameters are fixed and excluded from the free vector.
class JointObjective {
public:
  /// `x` is the experiment design matrix (all columns); y values at buffer and
  /// test cells are never read.
  JointObjective(const ModelStructure& model, const Fold& fold, const Eigen::VectorXd& y,
                 const Eigen::MatrixXd& x);

  Index parameter_dim() const noexcept { return static_cast<Index>(free_.size()); }
  Index missing_dim() const noexcept { return static_cast<Index>(missing_.size()); }
  BlockLayout layout() const noexcept { return layout_; }
  /// Original cell indices of the missing block: buffer cells, then test cells.
  const std::vector<Index>& missing() const noexcept { return missing_; }
  const ModelStructure& model() const noexcept { return model_; }

  /// Full constrained parameter vector for free unconstrained values.
  Eigen::VectorXd constrained(const Eigen::VectorXd& theta_u) const;
  /// Free unconstrained values for a full constrained vector.
  Eigen::VectorXd unconstrained(const Eigen::VectorXd& params) const;

  double value(const Eigen::VectorXd& theta_u, const Eigen::VectorXd& y_missing) const;
  /// z = [theta_u; y_missing]. Returns -inf for singular or out-of-support points.
  double evaluate(const Eigen::VectorXd& z, Eigen::VectorXd* grad) const;
  /// max over y_missing in closed form; gradient with respect to theta_u.
  double profile(const Eigen::VectorXd& theta_u, Eigen::VectorXd* grad) const;
  /// argmax over y_missing at fixed parameters (the conditional mean).
  Eigen::VectorXd impute(const Eigen::VectorXd& theta_u) const;

  /// beta = 0, rho at the interval midpoint, positive parameters at 1.
  Eigen::VectorXd initial_theta() const;
  /// Missing values at the training mean.
  Eigen::VectorXd initial_missing() const;

  Objective joint_function() const;
  Objective profile_function() const;

private:
  Eigen::VectorXd fill(const Eigen::VectorXd& y_missing) const;

  const ModelStructure& model_;
  Eigen::VectorXd y_; // NaN at missing cells
  Eigen::MatrixXd x_;
  std::vector<Index> missing_;
  std::vector<Index> free_;
  std::vector<Transform> transforms_;
  Eigen::VectorXd clamped_;
  BlockLayout layout_;
  double train_mean_ = 0.0;
};

struct LaplaceResult {
  Eigen::VectorXd map_point; ///< [theta_u; y_buffer; y_test]
  BlockLayout layout;
  double objective_value = minus_infinity;
  Eigen::MatrixXd hessian; ///< negative Hessian at the MAP
  bool converged = false;
  double gradient_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  int attempts = 0;

  Eigen::VectorXd parameters() const { return map_point.head(layout.parameters); }
  Eigen::VectorXd test_values() const { return map_point.tail(layout.test); }
};

struct LaplaceOptions {
  OptimizerOptions optimizer;
  /// Optimise the profile over parameters with the missing block solved in
  /// closed form; the joint Hessian is taken afterwards either way.
  bool profile = true;
  int retries = 1;
  double perturbation = 0.1;
};

/// Generic MAP plus curvature: quasi-Newton ascent from `init`, then the
/// negative Hessian by central differences of the gradient.
LaplaceResult fit_map(const Objective& objective, Eigen::VectorXd init,
                      const OptimizerOptions& opts, BlockLayout layout);

/// Laplace fit of one fold. `retry` supplies the perturbation for the
/// single retry when the first attempt does not converge.
LaplaceResult fit_fold(const JointObjective& objective, const LaplaceOptions& opts,
                       Stream* retry = nullptr);

/// Gaussian predictive over the test block only.
struct PredictiveBlock {
  GaussianDensity density;
};

/// Mean = MAP test values; covariance = test block of the inverse negative
/// Hessian. Throws DegenerateCurvatureError if the Hessian is not positive
/// definite; std::invalid_argument if the fit did not converge.
PredictiveBlock predictive_block(const LaplaceResult& result);

/// One-line JSON diagnostic record.
std::string to_json(const LaplaceResult& result);

} // namespace blockcv
