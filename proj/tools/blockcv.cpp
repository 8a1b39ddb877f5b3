#include "blockcv/config.hpp"
#include "blockcv/cvdesign.hpp"
#include "blockcv/errors.hpp"
#include "blockcv/harness.hpp"
#include "blockcv/report.hpp"
#include "blockcv/scoring.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace blockcv;

namespace {

enum Exit { ok = 0, domain = 1, usage = 2 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void log(const std::string& msg) { fmt::print(stderr, "blockcv: {}\n", msg); }

ExperimentConfig read_config(const std::string& path) {
  if (path.empty())
    throw UsageError("--config is required");
  if (!fs::exists(path))
    throw UsageError(fmt::format("config file not found: {}", path));
  try {
    return load_config(path);
  } catch (const ConfigError& e) {
    throw UsageError(fmt::format("{}: {}", path, e.what()));
  } catch (const std::runtime_error& e) {
    throw UsageError(e.what());
  }
}

std::vector<double> parse_numbers(const std::string& text) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    try {
      out.push_back(std::stod(item, &used));
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0)
      throw UsageError(fmt::format("not a number: '{}'", item));
  }
  return out;
}

// Rows separated by ';', entries by ','.
Eigen::MatrixXd parse_matrix(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::string row;
  std::istringstream in(text);
  while (std::getline(in, row, ';'))
    rows.push_back(parse_numbers(row));
  if (rows.empty())
    throw UsageError("empty matrix");
  Eigen::MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size())
      throw UsageError("matrix rows differ in length");
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  }
  return m;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
}

struct RunArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int parallelism = 1;
  std::optional<double> trim;
};

int cmd_run(const RunArgs& a, int verbosity) {
  ExperimentConfig config = read_config(a.config);
  if (a.seed)
    config.seed = *a.seed;
  if (a.trim) {
    config.trim = a.trim;
    if (const auto errs = validate(config); !errs.empty())
      throw UsageError(errs.front());
  }
  if (a.out.empty())
    throw UsageError("--out is required");
  const auto designs = design_labels(config);
  log(fmt::format("run '{}' seed {} parallelism {}: {} replications x {} scenarios x {} designs",
                  config.name, config.seed, a.parallelism, config.replications,
                  config.scenarios.size(), designs.size()));
  Progress progress;
  if (verbosity > 0)
    progress = [](std::size_t done, std::size_t total) {
      fmt::print(stderr, "\rblockcv: {}/{} tasks", done, total);
      if (done == total)
        fmt::print(stderr, "\n");
    };
  const ResultSet rs = run_experiment(config, a.parallelism, progress);
  try {
    write_results(a.out, rs);
  } catch (const std::exception& e) {
    throw UsageError(fmt::format("cannot write results to {}: {}", a.out, e.what()));
  }
  for (const std::string& line : summary_lines(config, rs.design_labels, rs.cells))
    fmt::print("{}\n", line);
  log(fmt::format("{} of {} replication records failed ({:.1f}%), {:.1f}s, results in {}",
                  rs.failed_records, rs.records.size(), 100.0 * rs.failure_rate,
                  rs.runtime.seconds, a.out));
  if (rs.failure_exceeded) {
    log(fmt::format("failure rate {:.1f}% exceeds the {:.0f}% limit; see manifest.json",
                    100.0 * rs.failure_rate, 100.0 * config.max_failure_rate));
    return domain;
  }
  return ok;
}

int cmd_summarize(const std::string& dir, std::optional<double> trim) {
  if (dir.empty())
    throw UsageError("--out is required");
  if (!fs::exists(fs::path(dir) / "manifest.json"))
    throw UsageError(fmt::format("no results in {}", dir));
  std::string csv;
  try {
    csv = resummarize(dir, trim);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  } catch (const std::runtime_error& e) {
    throw UsageError(e.what());
  }
  write_atomic(fs::path(dir) / "summary.csv", csv);
  fmt::print("{}", csv);
  return ok;
}

struct FoldArgs {
  std::string config;
  int rows = 0;
  int cols = 0;
  std::optional<int> size;
  std::optional<int> clusters;
  int halo = 1;
  std::string scheme = "rook";
  std::uint64_t seed = 0;
  std::optional<int> ascii;
  bool json = false;
};

int cmd_folds(const FoldArgs& a) {
  std::vector<FoldPlan> plans;
  if (!a.config.empty()) {
    const ExperimentConfig config = read_config(a.config);
    const Lattice lattice(config.rows, config.cols);
    const auto cells = design_cells(config, config.scenarios.front());
    for (std::size_t d = 0; d < cells.size(); ++d) {
      Stream rng = derive_stream(config.seed, 0, StreamPurpose::folds, d);
      plans.push_back(build_plan(lattice, cells[d], rng));
    }
  } else {
    if (a.rows < 1 || a.cols < 1)
      throw UsageError("--rows and --cols (or --config) are required");
    if (a.size.has_value() == a.clusters.has_value())
      throw UsageError("give exactly one of --size or --clusters");
    Scheme scheme;
    try {
      scheme = parse_scheme(a.scheme);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    const Lattice lattice(a.rows, a.cols);
    Stream rng = derive_stream(a.seed, 0, StreamPurpose::folds, 0);
    const DesignSpec design = a.size ? DesignSpec(BlockedDesign{*a.size, a.halo, scheme})
                                     : DesignSpec(ClusteredDesign{*a.clusters, a.halo, scheme});
    plans.push_back(build_plan(lattice, design, rng));
  }

  if (a.json) {
    if (plans.size() == 1) {
      fmt::print("{}\n", to_json(plans.front(), 2));
    } else {
      auto arr = nlohmann::json::array();
      for (const FoldPlan& p : plans)
        arr.push_back(nlohmann::json::parse(to_json(p)));
      fmt::print("{}\n", arr.dump(2));
    }
  }
  for (const FoldPlan& p : plans) {
    std::size_t test_min = SIZE_MAX, test_max = 0, buf_min = SIZE_MAX, buf_max = 0,
                train_min = SIZE_MAX, train_max = 0;
    for (const Fold& f : p.folds()) {
      test_min = std::min(test_min, f.test.size());
      test_max = std::max(test_max, f.test.size());
      buf_min = std::min(buf_min, f.buffer.size());
      buf_max = std::max(buf_max, f.buffer.size());
      train_min = std::min(train_min, f.train.size());
      train_max = std::max(train_max, f.train.size());
    }
    const auto range = [](std::size_t lo, std::size_t hi) {
      return lo == hi ? fmt::format("{}", lo) : fmt::format("{}-{}", lo, hi);
    };
    const std::string line =
        fmt::format("{}x{} {}: K={} folds, test {}, buffer {}, train {}", p.lattice().rows(),
                    p.lattice().cols(), describe(p.design()), p.size(), range(test_min, test_max),
                    range(buf_min, buf_max), range(train_min, train_max));
    if (a.json)
      fmt::print(stderr, "{}\n", line);
    else
      fmt::print("{}\n", line);
    if (a.ascii) {
      if (*a.ascii < 0 || static_cast<std::size_t>(*a.ascii) >= p.size())
        throw UsageError(fmt::format("--ascii {} outside [0, {})", *a.ascii, p.size()));
      fmt::print(a.json ? stderr : stdout, "{}", render_ascii(p, static_cast<std::size_t>(*a.ascii)));
    }
  }
  return ok;
}

struct DemoArgs {
  std::string file;
  std::string mean;
  std::string cov;
  std::string y;
  std::string deltas;
  bool json = false;
};

int cmd_score_demo(const DemoArgs& a) {
  Eigen::VectorXd mean, y;
  Eigen::MatrixXd cov;
  std::vector<double> deltas;
  if (!a.file.empty()) {
    std::ifstream in(a.file);
    if (!in)
      throw UsageError(fmt::format("cannot read {}", a.file));
    nlohmann::json j;
    try {
      in >> j;
      if (j.contains("mean"))
        mean = to_vector(j["mean"].get<std::vector<double>>());
      if (j.contains("y"))
        y = to_vector(j["y"].get<std::vector<double>>());
      if (j.contains("covariance")) {
        const auto rows = j["covariance"].get<std::vector<std::vector<double>>>();
        cov.resize(static_cast<Index>(rows.size()), static_cast<Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
          if (rows[i].size() != rows.size())
            throw UsageError("covariance must be square");
          for (std::size_t k = 0; k < rows.size(); ++k)
            cov(static_cast<Index>(i), static_cast<Index>(k)) = rows[i][k];
        }
      }
      if (j.contains("deltas"))
        deltas = j["deltas"].get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(fmt::format("{}: {}", a.file, e.what()));
    }
  }
  if (!a.mean.empty())
    mean = to_vector(parse_numbers(a.mean));
  if (!a.y.empty())
    y = to_vector(parse_numbers(a.y));
  if (!a.cov.empty())
    cov = parse_matrix(a.cov);
  if (!a.deltas.empty())
    deltas = parse_numbers(a.deltas);

  const bool have_density = cov.size() > 0 || y.size() > 0 || mean.size() > 0;
  if (!have_density && deltas.empty())
    throw UsageError("give --cov and --y (and optionally --mean), or --deltas");

  nlohmann::json out = nlohmann::json::object();
  std::vector<std::string> lines;
  if (have_density) {
    if (mean.size() == 0)
      mean = Eigen::VectorXd::Zero(y.size());
    if (cov.rows() != cov.cols() || cov.rows() != mean.size() || y.size() != mean.size())
      throw UsageError(fmt::format("dimension mismatch: mean {}, covariance {}x{}, y {}",
                                   mean.size(), cov.rows(), cov.cols(), y.size()));
    const PredictiveBlock pred{GaussianDensity::from_covariance(mean, cov)};
    const FoldScore s = score_fold(pred, y);
    out["joint"] = s.joint;
    out["pointwise"] = s.pointwise;
    lines.push_back(fmt::format("joint     {:.6f}", s.joint));
    lines.push_back(fmt::format("pointwise {:.6f}", s.pointwise));
  }
  if (!deltas.empty()) {
    const double z = sample_z(deltas);
    out["z_hat"] = z;
    lines.push_back(fmt::format("z_hat     {:.4f}", z));
  }
  if (a.json) {
    fmt::print("{}\n", out.dump());
  } else {
    for (const auto& l : lines)
      fmt::print("{}\n", l);
  }
  return ok;
}

int cmd_validate(const std::string& path) {
  const ExperimentConfig c = read_config(path);
  fmt::print("{}: valid ({} scenarios, {} designs, {} replications, seed {})\n", path,
             c.scenarios.size(), c.design.values.size(), c.replications, c.seed);
  return ok;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Block cross-validation for Bayesian spatial models"};
  app.require_subcommand(1);
  int verbosity = 0;
  app.add_flag("-v,--verbose", verbosity, "Progress on stderr");

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run a replicated model-selection experiment");
  run_cmd->add_option("--config", run.config, "Experiment config (JSON)")->required();
  run_cmd->add_option("--out", run.out, "Output directory")->required();
  run_cmd->add_option("--seed", run.seed, "Override the master seed");
  run_cmd->add_option("--parallelism", run.parallelism, "Worker threads")
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--trim", run.trim, "Central share kept when summarising");
  run_cmd->add_flag("-v,--verbose", verbosity);

  std::string sum_dir;
  std::optional<double> sum_trim;
  auto* sum_cmd = app.add_subcommand("summarize", "Rebuild summary.csv from a results directory");
  sum_cmd->add_option("--out", sum_dir, "Results directory")->required();
  sum_cmd->add_option("--trim", sum_trim, "Central share kept");

  FoldArgs folds;
  auto* folds_cmd = app.add_subcommand("folds", "Describe a fold plan");
  folds_cmd->add_option("--config", folds.config, "Take lattice and designs from a config");
  folds_cmd->add_option("--rows", folds.rows, "Lattice rows");
  folds_cmd->add_option("--cols", folds.cols, "Lattice columns");
  folds_cmd->add_option("--size,-s", folds.size, "Block side s");
  folds_cmd->add_option("--clusters,-k", folds.clusters, "Cluster count k");
  folds_cmd->add_option("--halo", folds.halo, "Halo order");
  folds_cmd->add_option("--scheme", folds.scheme, "rook or queen");
  folds_cmd->add_option("--seed", folds.seed, "Seed for clustering");
  folds_cmd->add_option("--ascii", folds.ascii, "Draw this fold as a T/B/· grid");
  folds_cmd->add_flag("--json", folds.json, "Fold plan JSON on stdout");

  DemoArgs demo;
  auto* demo_cmd = app.add_subcommand("score-demo", "Joint and pointwise scores of one block");
  demo_cmd->add_option("--file", demo.file, "JSON with mean, covariance, y, deltas");
  demo_cmd->add_option("--mean", demo.mean, "Comma-separated mean (default zero)");
  demo_cmd->add_option("--cov", demo.cov, "Covariance, rows separated by ';'");
  demo_cmd->add_option("--y", demo.y, "Comma-separated observations");
  demo_cmd->add_option("--deltas", demo.deltas, "Fold deltas for the sample Z");
  demo_cmd->add_flag("--json", demo.json, "JSON on stdout");

  std::string validate_path;
  auto* val_cmd = app.add_subcommand("validate-config", "Check a config without running it");
  val_cmd->add_option("--config", validate_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : usage;
  }

  try {
    if (*run_cmd)
      return cmd_run(run, verbosity);
    if (*sum_cmd)
      return cmd_summarize(sum_dir, sum_trim);
    if (*folds_cmd)
      return cmd_folds(folds);
    if (*demo_cmd)
      return cmd_score_demo(demo);
    if (*val_cmd)
      return cmd_validate(validate_path);
  } catch (const UsageError& e) {
    log(e.what());
    return usage;
  } catch (const Error& e) {
    log(e.what());
    return domain;
  } catch (const std::invalid_argument& e) {
    log(e.what());
    return domain;
  } catch (const std::exception& e) {
    log(e.what());
    return usage;
  }
  return usage;
}
