#pragma once

#include "blockcv/laplace.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string_view>
#include <vector>

namespace blockcv {

enum class ScoreMode { joint, pointwise };

std::string_view to_string(ScoreMode mode);
inline constexpr ScoreMode score_modes[] = {ScoreMode::joint, ScoreMode::pointwise};

struct FoldScore {
  int fold = 0;
  double joint = 0.0;
  double pointwise = 0.0;
  Index n_test = 0;
  bool failed = false;

  double get(ScoreMode mode) const { return mode == ScoreMode::joint ? joint : pointwise; }
};

/// Joint: multivariate normal log density of the observed test block.
/// Pointwise: sum of univariate log densities from the marginals.
FoldScore score_fold(const PredictiveBlock& pred, const Eigen::VectorXd& y_test, int fold = 0);
FoldScore failed_fold(int fold, Index n_test);

/// Sum of fold scores. Throws IncompleteReplicationError if any fold failed.
double elpd_cv(const std::vector<FoldScore>& scores, ScoreMode mode);

/// elpd_A - elpd_B.
double pairwise_stat(double elpd_a, double elpd_b);

/// Single-dataset Z: sum(d) / sqrt(K / (K - 1) * sum((d - mean)^2)).
/// Throws UndefinedStatisticError when K < 2 or the spread is zero.
double sample_z(const std::vector<double>& deltas);

struct PopulationSummary {
  ScoreMode mode = ScoreMode::joint;
  std::size_t n = 0;         ///< statistics supplied
  std::size_t n_trimmed = 0; ///< statistics kept after trimming
  double mean = 0.0;
  double sd = 0.0;
  std::optional<double> z; ///< empty when sd = 0
  double accuracy = 0.0;   ///< share of untrimmed statistics > 0
  std::optional<double> trim;
};

/// Number of values dropped from each tail for a keep-central `trim` share.
std::size_t trim_count(std::size_t n, double trim);

/// Mean, sample sd and Z over replications, optionally after symmetric
/// trimming; accuracy always uses every statistic. Requires n >= 2.
PopulationSummary population_summary(const std::vector<double>& stats,
                                     std::optional<double> trim = std::nullopt,
                                     ScoreMode mode = ScoreMode::joint);

} // namespace blockcv
