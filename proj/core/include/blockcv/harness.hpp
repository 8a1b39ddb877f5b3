#pragma once

#include "blockcv/config.hpp"
#include "blockcv/scoring.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace blockcv {

/// Covariates and observations of one replication of one scenario.
struct ReplicationArtifact {
  int replication = 0;
  std::uint64_t data_seed = 0; ///< first draw of the data stream, for provenance
  Eigen::MatrixXd x;           ///< n x covariates; empty when covariates = 0
  Eigen::VectorXd y;
};

/// Design matrix of a replication: intercept then standard normal columns.
Eigen::MatrixXd draw_covariates(const ExperimentConfig& config, int replication);

/// Draws X and y for one replication. The same (seed, replication) gives the
/// same X and the same underlying normal draws in every scenario and design.
ReplicationArtifact draw_replication(const ExperimentConfig& config, const Scenario& scenario,
                                     int replication);

/// Outcome of one (replication, scenario, design) cell.
struct SelectionRecord {
  int replication = 0;
  std::size_t scenario = 0;
  std::size_t design = 0;
  bool failed = false;
  std::string failure;
  std::array<double, 2> elpd_a{};
  std::array<double, 2> elpd_b{};
  std::array<double, 2> stat{}; ///< elpd_a - elpd_b per mode
  std::array<std::optional<double>, 2> z_hat{};

  double get(ScoreMode mode) const { return stat[static_cast<std::size_t>(mode)]; }
  bool correct(ScoreMode mode) const { return !failed && get(mode) > 0.0; }
};

/// One Laplace fit of one candidate on one fold.
struct FoldRecord {
  int replication = 0;
  std::size_t scenario = 0;
  std::size_t design = 0;
  int model = 0; ///< 0 = A, 1 = B
  FoldScore score;
  bool converged = false;
  int attempts = 0;
  int iterations = 0;
  double gradient_norm = 0.0;
  std::string error;
};

struct CellSummary {
  std::size_t scenario = 0;
  std::size_t design = 0;
  ScoreMode mode = ScoreMode::joint;
  std::size_t failures = 0; ///< failed replications in this cell
  /// Empty when fewer than two replications completed.
  std::optional<PopulationSummary> summary;
};

struct RuntimeInfo {
  int parallelism = 1;
  double seconds = 0.0;
  std::string started; ///< UTC, ISO 8601
  std::string version;
};

struct ResultSet {
  ExperimentConfig config;
  std::vector<std::string> design_labels; ///< describe() of each design cell
  std::vector<SelectionRecord> records;   ///< sorted by (scenario, design, replication)
  std::vector<FoldRecord> folds;
  std::vector<CellSummary> cells; ///< sorted by (scenario, design, mode)
  std::size_t failed_records = 0;
  double failure_rate = 0.0;
  bool failure_exceeded = false;
  RuntimeInfo runtime;
};

/// Progress callback: (completed tasks, total tasks).
using Progress = std::function<void(std::size_t, std::size_t)>;

/// Runs every (replication, scenario, design) cell. Per-fold failures mark
/// the replication's record as failed; the run always completes and sets
/// failure_exceeded when the failed share exceeds config.max_failure_rate.
/// Output is identical for any parallelism. Throws ConfigError for an
/// invalid config before any work.
ResultSet run_experiment(const ExperimentConfig& config, int parallelism = 1,
                         const Progress& progress = {});

/// Per-cell, per-mode population summaries from selection records.
std::vector<CellSummary> summarize_records(const ExperimentConfig& config,
                                           std::size_t design_count,
                                           const std::vector<SelectionRecord>& records);

/// Labels for the design grid, e.g. "s=4".
std::vector<std::string> design_labels(const ExperimentConfig& config);

std::string_view library_version();

} // namespace blockcv
