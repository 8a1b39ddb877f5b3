#pragma once

#include <Eigen/Dense>

#include <functional>

namespace blockcv {

/// Returns f(x); fills *grad with df/dx when grad is non-null. May return
/// -inf (or NaN) to reject a point.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct OptimizerOptions {
  double gradient_tolerance = 1e-6; ///< on the infinity norm
  int max_iterations = 500;
  int memory = 10;
  double hessian_step = 1e-4; ///< relative: h = step * (1 + |x|)
};

struct OptimizationResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  double gradient_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Limited-memory BFGS ascent with a strong Wolfe line search. Near the
/// optimum, where function differences sink below rounding, steps are also
/// accepted on the approximate Wolfe conditions.
OptimizationResult maximize(const Objective& f, Eigen::VectorXd init,
                            const OptimizerOptions& opts = {});

/// -d2f/dx2 by central differences of the gradient, symmetrised.
/// Throws DegenerateCurvatureError if the gradient is unavailable at a probe.
Eigen::MatrixXd negative_hessian(const Objective& f, const Eigen::VectorXd& x,
                                 double relative_step = 1e-4);

} // namespace blockcv
