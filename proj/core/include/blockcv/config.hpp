#pragma once

#include "blockcv/cvdesign.hpp"
#include "blockcv/laplace.hpp"
#include "blockcv/models.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace blockcv {

/// Data-generating process for one scenario.
struct DgpSpec {
  Family family = Family::sar;
  Scheme scheme = Scheme::rook;
  int order = 1;
  bool standardized = true;
  KernelKind kernel = KernelKind::matern_half;
  Eigen::VectorXd beta;
  double rho = 0.0;
  double sigma2 = 1.0;
  double lambda = 1.0;
  double sigma = 1.0;

  /// Short label for tables: "rho=0.95" or the kernel name.
  std::string describe() const;
};

/// One dgp with its candidate pair. Candidate A is the intended-correct model:
/// positive statistics mean correct selection.
struct Scenario {
  std::string label;
  DgpSpec dgp;
  ModelSpec a;
  ModelSpec b;
};

enum class DesignType { blocked, clustered };

struct DesignGrid {
  DesignType type = DesignType::blocked;
  std::vector<int> values; ///< block sides s, or cluster counts k
  int halo_order = 1;
  std::optional<Scheme> halo_scheme;
};

struct ExperimentConfig {
  std::string name = "experiment";
  int rows = 12;
  int cols = 12;
  /// Width of the design matrix: an intercept column plus (covariates - 1)
  /// standard normal columns. Zero means no design matrix.
  int covariates = 0;
  std::vector<Scenario> scenarios;
  DesignGrid design;
  int replications = 1;
  std::uint64_t seed = 0;
  std::optional<double> trim;
  LaplaceOptions laplace;
  double max_failure_rate = 0.2;
};

/// Parse and validate a JSON config. Throws ConfigError listing every problem.
ExperimentConfig parse_config(const std::string& json_text);

/// Reads the file then parses. Throws std::runtime_error if unreadable.
ExperimentConfig load_config(const std::filesystem::path& path);

/// All problems with a config; empty when valid.
std::vector<std::string> validate(const ExperimentConfig& config);

/// Canonical JSON echo of a config (parse_config(to_json(c)) reproduces c).
std::string to_json(const ExperimentConfig& config, int indent = 2);

/// Halo scheme for a scenario: explicit setting, else the shared candidate
/// scheme, else queen when the candidates disagree, rook for kernel models.
Scheme halo_scheme_for(const ExperimentConfig& config, const Scenario& scenario);

/// Design cells of the grid for one scenario.
std::vector<DesignSpec> design_cells(const ExperimentConfig& config, const Scenario& scenario);

} // namespace blockcv
