#include "blockcv/optimize.hpp"

#include "blockcv/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <vector>

namespace blockcv {

namespace {

constexpr double c1 = 1e-4;
constexpr double c2 = 0.9;

// Minimisation view of the objective along a ray.
struct Ray {
  const Objective& f;
  const Eigen::VectorXd& x0;
  const Eigen::VectorXd& dir;
  int& evaluations;

  struct Sample {
    double alpha;
    double phi;
    double dphi;
    Eigen::VectorXd x;
    Eigen::VectorXd grad; // of the minimised function
    bool ok() const { return std::isfinite(phi) && std::isfinite(dphi); }
  };

  Sample at(double alpha) const {
    Sample s{alpha, 0.0, 0.0, x0 + alpha * dir, {}};
    Eigen::VectorXd g(x0.size());
    const double v = f(s.x, &g);
    ++evaluations;
    s.phi = -v;
    s.grad = -g;
    s.dphi = std::isfinite(s.phi) && s.grad.allFinite() ? s.grad.dot(dir)
                                                        : std::numeric_limits<double>::quiet_NaN();
    return s;
  }
};

double interpolate(const Ray::Sample& lo, const Ray::Sample& hi) {
  // Minimiser of the cubic Hermite interpolant, safeguarded to the middle
  // 80% of the bracket.
  const double a = lo.alpha;
  const double b = hi.alpha;
  const double width = b - a;
  double t = 0.5;
  if (hi.ok()) {
    const double d1 = lo.dphi + hi.dphi - 3.0 * (lo.phi - hi.phi) / (a - b);
    const double disc = d1 * d1 - lo.dphi * hi.dphi;
    if (disc >= 0.0) {
      const double d2 = std::copysign(std::sqrt(disc), b - a);
      const double denom = hi.dphi - lo.dphi + 2.0 * d2;
      if (denom != 0.0) {
        const double cand = b - (b - a) * (hi.dphi + d2 - d1) / denom;
        t = (cand - a) / width;
      }
    }
  }
  if (!std::isfinite(t) || t < 0.1 || t > 0.9)
    t = 0.5;
  return a + t * width;
}

struct LineSearch {
  const Ray& ray;
  double phi0;
  double dphi0;
  double eps;

  bool sufficient(const Ray::Sample& s) const {
    return s.phi <= phi0 + c1 * s.alpha * dphi0;
  }
  bool curvature(const Ray::Sample& s) const { return std::abs(s.dphi) <= -c2 * dphi0; }
  // Hager-Zhang approximate Wolfe conditions.
  bool approximate(const Ray::Sample& s) const {
    return s.phi <= phi0 + eps && (2.0 * c1 - 1.0) * dphi0 >= s.dphi && s.dphi >= c2 * dphi0;
  }

  std::optional<Ray::Sample> zoom(Ray::Sample lo, Ray::Sample hi) const {
    for (int i = 0; i < 40; ++i) {
      const double alpha = interpolate(lo, hi);
      if (std::abs(hi.alpha - lo.alpha) < 1e-16 * std::max(1.0, std::abs(lo.alpha)))
        break;
      Ray::Sample s = ray.at(alpha);
      if (!s.ok()) {
        hi = s;
        continue;
      }
      if ((!sufficient(s) && !approximate(s)) || s.phi >= lo.phi + eps) {
        hi = s;
        continue;
      }
      if (curvature(s) || approximate(s))
        return s;
      if (s.dphi * (hi.alpha - lo.alpha) >= 0.0)
        hi = lo;
      lo = s;
    }
    if (lo.alpha > 0.0 && lo.phi < phi0)
      return lo;
    return std::nullopt;
  }

  std::optional<Ray::Sample> run(double alpha) const {
    Ray::Sample prev{0.0, phi0, dphi0, ray.x0, {}};
    for (int i = 0; i < 60; ++i) {
      Ray::Sample s = ray.at(alpha);
      if (!s.ok()) {
        // Rejected point: bracket between the last good sample and here.
        return zoom(prev, s);
      }
      if ((!sufficient(s) && !approximate(s)) || (i > 0 && s.phi >= prev.phi))
        return zoom(prev, s);
      if (curvature(s) || approximate(s))
        return s;
      if (s.dphi >= 0.0)
        return zoom(s, prev);
      prev = s;
      alpha *= 2.0;
    }
    return std::nullopt;
  }
};

} // namespace

OptimizationResult maximize(const Objective& f, Eigen::VectorXd init,
                            const OptimizerOptions& opts) {
  OptimizationResult out;
  const Eigen::Index d = init.size();
  out.x = std::move(init);
  out.gradient = Eigen::VectorXd::Zero(d);
  if (d == 0) {
    out.value = f(out.x, &out.gradient);
    out.evaluations = 1;
    out.converged = std::isfinite(out.value);
    return out;
  }

  Eigen::VectorXd g(d);
  double value = f(out.x, &g);
  out.evaluations = 1;
  if (!std::isfinite(value) || !g.allFinite()) {
    out.value = value;
    out.gradient = g;
    out.gradient_norm = std::numeric_limits<double>::infinity();
    return out;
  }
  // Work with the minimisation problem -f.
  Eigen::VectorXd x = out.x;
  double phi = -value;
  Eigen::VectorXd grad = -g;
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> history;
  bool restarted = false;

  int iter = 0;
  for (; iter < opts.max_iterations; ++iter) {
    if (grad.lpNorm<Eigen::Infinity>() < opts.gradient_tolerance)
      break;

    // Two-loop recursion.
    Eigen::VectorXd q = grad;
    std::vector<double> alphas(history.size());
    for (std::size_t i = history.size(); i-- > 0;) {
      const auto& [s, y] = history[i];
      alphas[i] = s.dot(q) / y.dot(s);
      q -= alphas[i] * y;
    }
    double gamma = 1.0;
    if (!history.empty()) {
      const auto& [s, y] = history.back();
      gamma = s.dot(y) / y.squaredNorm();
    }
    Eigen::VectorXd dir = gamma * q;
    for (std::size_t i = 0; i < history.size(); ++i) {
      const auto& [s, y] = history[i];
      const double beta = y.dot(dir) / y.dot(s);
      dir += s * (alphas[i] - beta);
    }
    dir = -dir;
    double dphi0 = grad.dot(dir);
    if (!(dphi0 < 0.0)) {
      history.clear();
      dir = -grad;
      dphi0 = -grad.squaredNorm();
    }

    double alpha0 = 1.0;
    if (history.empty())
      alpha0 = std::min(1.0, 1.0 / grad.lpNorm<Eigen::Infinity>());
    const Ray ray{f, x, dir, out.evaluations};
    const LineSearch search{ray, phi, dphi0, 1e-12 * (1.0 + std::abs(phi))};
    auto step = search.run(alpha0);
    if (!step) {
      if (!history.empty() && !restarted) {
        // Retry once along steepest descent with fresh curvature memory.
        history.clear();
        restarted = true;
        continue;
      }
      break;
    }
    restarted = false;
    const Eigen::VectorXd s = step->x - x;
    const Eigen::VectorXd y = step->grad - grad;
    if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
      history.emplace_back(s, y);
      if (static_cast<int>(history.size()) > opts.memory)
        history.pop_front();
    }
    x = step->x;
    phi = step->phi;
    grad = step->grad;
  }

  out.x = x;
  out.value = -phi;
  out.gradient = -grad;
  out.gradient_norm = grad.lpNorm<Eigen::Infinity>();
  out.iterations = iter;
  out.converged = out.gradient_norm < opts.gradient_tolerance;
  return out;
}

Eigen::MatrixXd negative_hessian(const Objective& f, const Eigen::VectorXd& x,
                                 double relative_step) {
  const Eigen::Index d = x.size();
  Eigen::MatrixXd h(d, d);
  Eigen::VectorXd gp(d);
  Eigen::VectorXd gm(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double step = relative_step * (1.0 + std::abs(x(j)));
    Eigen::VectorXd xp = x;
    Eigen::VectorXd xm = x;
    xp(j) += step;
    xm(j) -= step;
    const double fp = f(xp, &gp);
    const double fm = f(xm, &gm);
    if (!std::isfinite(fp) || !std::isfinite(fm) || !gp.allFinite() || !gm.allFinite())
      throw DegenerateCurvatureError("gradient unavailable while probing curvature");
    h.col(j) = -(gp - gm) / (xp(j) - xm(j));
  }
  return 0.5 * (h + h.transpose());
}

} // namespace blockcv
