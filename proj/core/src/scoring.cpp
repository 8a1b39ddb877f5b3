#include "blockcv/scoring.hpp"

#include "blockcv/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace blockcv {

std::string_view to_string(ScoreMode mode) {
  return mode == ScoreMode::joint ? "joint" : "pointwise";
}

FoldScore score_fold(const PredictiveBlock& pred, const Eigen::VectorXd& y_test, int fold) {
  const GaussianDensity& g = pred.density;
  if (y_test.size() != g.dim())
    throw std::invalid_argument(fmt::format("score_fold: {} test values for a {}-d predictive",
                                            y_test.size(), g.dim()));
  FoldScore s;
  s.fold = fold;
  s.n_test = g.dim();
  s.joint = log_density(g, y_test);
  if (g.dim() == 1) {
    s.pointwise = s.joint;
    return s;
  }
  const Eigen::VectorXd var = g.covariance().diagonal();
  s.pointwise = 0.0;
  for (Index i = 0; i < g.dim(); ++i)
    s.pointwise += normal_log_density(y_test(i), g.mean()(i), var(i));
  return s;
}

FoldScore failed_fold(int fold, Index n_test) {
  FoldScore s;
  s.fold = fold;
  s.n_test = n_test;
  s.failed = true;
  s.joint = s.pointwise = std::numeric_limits<double>::quiet_NaN();
  return s;
}

double elpd_cv(const std::vector<FoldScore>& scores, ScoreMode mode) {
  double total = 0.0;
  for (const FoldScore& s : scores) {
    if (s.failed)
      throw IncompleteReplicationError(fmt::format("fold {} failed", s.fold));
    total += s.get(mode);
  }
  return total;
}

double pairwise_stat(double elpd_a, double elpd_b) { return elpd_a - elpd_b; }

double sample_z(const std::vector<double>& deltas) {
  const std::size_t k = deltas.size();
  if (k < 2)
    throw UndefinedStatisticError("sample Z needs at least two folds");
  const double sum = std::accumulate(deltas.begin(), deltas.end(), 0.0);
  const double mean = sum / static_cast<double>(k);
  double ss = 0.0;
  for (double d : deltas)
    ss += (d - mean) * (d - mean);
  const double denom = std::sqrt(static_cast<double>(k) / static_cast<double>(k - 1) * ss);
  if (!(denom > 0.0))
    throw UndefinedStatisticError("sample Z undefined: fold deltas have zero spread");
  return sum / denom;
}

std::size_t trim_count(std::size_t n, double trim) {
  if (!(trim > 0.0 && trim <= 1.0))
    throw std::invalid_argument(fmt::format("trim fraction must lie in (0, 1], got {}", trim));
  // Tolerance keeps e.g. 100 * (1 - 0.98) / 2 from rounding up to 2.
  const double tail = static_cast<double>(n) * (1.0 - trim) / 2.0;
  return static_cast<std::size_t>(std::ceil(tail - 1e-9));
}

PopulationSummary population_summary(const std::vector<double>& stats,
                                      std::optional<double> trim, ScoreMode mode) {
  if (stats.size() < 2)
    throw std::invalid_argument("population_summary needs at least two statistics");
  PopulationSummary out;
  out.mode = mode;
  out.n = stats.size();
  out.trim = trim;
  out.accuracy = static_cast<double>(std::count_if(stats.begin(), stats.end(),
                                                   [](double s) { return s > 0.0; })) /
                 static_cast<double>(stats.size());

  std::vector<double> kept = stats;
  if (trim) {
    const std::size_t drop = trim_count(stats.size(), *trim);
    if (2 * drop + 2 > stats.size())
      throw std::invalid_argument("trimming leaves fewer than two statistics");
    std::sort(kept.begin(), kept.end());
    kept = std::vector<double>(kept.begin() + static_cast<std::ptrdiff_t>(drop),
                               kept.end() - static_cast<std::ptrdiff_t>(drop));
  }
  out.n_trimmed = kept.size();
  const double n = static_cast<double>(kept.size());
  out.mean = std::accumulate(kept.begin(), kept.end(), 0.0) / n;
  double ss = 0.0;
  for (double s : kept)
    ss += (s - out.mean) * (s - out.mean);
  out.sd = std::sqrt(ss / (n - 1.0));
  if (out.sd > 0.0)
    out.z = out.mean / out.sd;
  return out;
}

} // namespace blockcv
