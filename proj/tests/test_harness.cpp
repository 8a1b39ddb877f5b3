#include "blockcv/errors.hpp"
#include "blockcv/harness.hpp"
#include "blockcv/report.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

using namespace blockcv;

namespace {

ExperimentConfig small_config() {
  return parse_config(R"({
    "name": "small",
    "lattice": {"rows": 4, "cols": 4},
    "replications": 4,
    "seed": 77,
    "covariates": 3,
    "dgp": {"family": "sar", "scheme": "rook", "beta": [1, 1, 0.9], "sigma2": 2},
    "candidates": {
      "A": {"name": "first", "family": "sar", "columns": [0, 1]},
      "B": {"name": "second", "family": "sar", "columns": [0, 2]}
    },
    "scenarios": [{"label": "weak", "dgp": {"rho": 0.2}}, {"label": "strong", "dgp": {"rho": 0.9}}],
    "design": {"type": "blocked", "sizes": [1, 2]}
  })");
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace

TEST(Streams, DistinctAcrossTheGrid) {
  std::set<std::uint64_t> first;
  std::size_t count = 0;
  for (std::uint64_t rep = 0; rep < 200; ++rep)
    for (StreamPurpose p : {StreamPurpose::covariates, StreamPurpose::data, StreamPurpose::folds,
                            StreamPurpose::retry})
      for (std::uint64_t lane = 0; lane < 8; ++lane) {
        first.insert(derive_stream(12345, rep, p, lane)());
        ++count;
      }
  EXPECT_EQ(first.size(), count);
  EXPECT_EQ(derive_stream(1, 2, StreamPurpose::data)(), derive_stream(1, 2, StreamPurpose::data)());
}

TEST(Replication, CovariatesAndDataAreReproducible) {
  const ExperimentConfig c = small_config();
  const Eigen::MatrixXd x = draw_covariates(c, 0);
  EXPECT_EQ(x.col(0), Eigen::VectorXd::Ones(16));
  EXPECT_EQ(x, draw_covariates(c, 0));
  EXPECT_NE(x, draw_covariates(c, 1));

  const auto a = draw_replication(c, c.scenarios[0], 2);
  const auto b = draw_replication(c, c.scenarios[0], 2);
  EXPECT_EQ(a.y, b.y);
  EXPECT_EQ(a.x, b.x);
  EXPECT_NE(a.y, draw_replication(c, c.scenarios[0], 3).y);

  // The design grid does not touch the data streams.
  ExperimentConfig other = c;
  other.design.values = {4};
  EXPECT_EQ(draw_replication(other, other.scenarios[0], 2).y, a.y);
}

TEST(RunExperiment, DeterministicAcrossParallelism) {
  const ExperimentConfig c = small_config();
  const ResultSet one = run_experiment(c, 1);
  const ResultSet three = run_experiment(c, 3);
  ASSERT_EQ(one.records.size(), 2u * 2u * 4u);
  ASSERT_EQ(one.records.size(), three.records.size());
  for (std::size_t i = 0; i < one.records.size(); ++i) {
    const auto& a = one.records[i];
    const auto& b = three.records[i];
    EXPECT_EQ(a.replication, b.replication);
    EXPECT_EQ(a.design, b.design);
    for (std::size_t m = 0; m < 2; ++m)
      EXPECT_TRUE(same_bits(a.stat[m], b.stat[m]));
  }
  EXPECT_EQ(summary_csv(c, one.design_labels, one.cells),
            summary_csv(c, three.design_labels, three.cells));
  EXPECT_EQ(one.failed_records, 0u);
  EXPECT_FALSE(one.failure_exceeded);
  EXPECT_EQ(one.cells.size(), 2u * 2u * 2u);

  // Leave-one-out: joint and pointwise coincide fold by fold.
  for (const auto& r : one.records)
    if (r.design == 0)
      EXPECT_EQ(r.stat[0], r.stat[1]);
}

TEST(RunExperiment, SwappingCandidatesNegatesStatistics) {
  ExperimentConfig c = small_config();
  c.replications = 3;
  c.design.values = {2};
  ExperimentConfig swapped = c;
  for (auto& s : swapped.scenarios)
    std::swap(s.a, s.b);
  const ResultSet a = run_experiment(c);
  const ResultSet b = run_experiment(swapped);
  for (std::size_t i = 0; i < a.records.size(); ++i)
    for (std::size_t m = 0; m < 2; ++m)
      EXPECT_EQ(a.records[i].stat[m], -b.records[i].stat[m]);
  for (std::size_t i = 0; i < a.cells.size(); ++i)
    EXPECT_NEAR(a.cells[i].summary->accuracy, 1.0 - b.cells[i].summary->accuracy, 1e-12);
}

TEST(RunExperiment, FailuresAreRecordedAndFlagged) {
  ExperimentConfig c = small_config();
  c.replications = 2;
  c.scenarios.resize(1);
  c.design.values = {2};
  c.laplace.optimizer.max_iterations = 1;
  c.laplace.retries = 0;
  const ResultSet rs = run_experiment(c);
  EXPECT_EQ(rs.failed_records, rs.records.size());
  EXPECT_TRUE(rs.failure_exceeded);
  EXPECT_FALSE(rs.records[0].failure.empty());
  for (const auto& cell : rs.cells) {
    EXPECT_FALSE(cell.summary.has_value());
    EXPECT_EQ(cell.failures, 2u);
  }
  EXPECT_EQ(summary_csv(c, rs.design_labels, rs.cells).find('\n') + 1,
            summary_csv(c, rs.design_labels, rs.cells).size());
}

TEST(RunExperiment, RejectsInvalidConfig) {
  ExperimentConfig c = small_config();
  c.design.values = {3};
  EXPECT_THROW(run_experiment(c), ConfigError);
}

TEST(Report, FilesRoundTrip) {
  const ExperimentConfig c = small_config();
  const ResultSet rs = run_experiment(c, 2);
  const auto dir = std::filesystem::temp_directory_path() / "blockcv_report_test";
  std::filesystem::remove_all(dir);
  write_results(dir, rs);
  for (const char* f : {"summary.csv", "replications.csv", "scores.csv", "manifest.json"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;

  const auto records = parse_replications(slurp(dir / "replications.csv"), c);
  ASSERT_EQ(records.size(), rs.records.size());
  for (std::size_t i = 0; i < records.size(); ++i)
    for (std::size_t m = 0; m < 2; ++m) {
      EXPECT_TRUE(same_bits(records[i].stat[m], rs.records[i].stat[m]));
      EXPECT_EQ(records[i].z_hat[m].has_value(), rs.records[i].z_hat[m].has_value());
    }
  EXPECT_EQ(resummarize(dir), slurp(dir / "summary.csv"));
  EXPECT_NE(resummarize(dir, 0.5), slurp(dir / "summary.csv"));

  const std::string summary = slurp(dir / "summary.csv");
  EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 1 + 8);
  const std::string scores = slurp(dir / "scores.csv");
  // 2 scenarios x 4 replications x (16 + 4 folds) x 2 models, plus header.
  EXPECT_EQ(std::count(scores.begin(), scores.end(), '\n'), 1 + 2 * 4 * 20 * 2);
  EXPECT_EQ(config_from_manifest(slurp(dir / "manifest.json")).name, "small");
  std::filesystem::remove_all(dir);
}

TEST(Report, UndefinedZLeavesEmptyField) {
  const ExperimentConfig c = small_config();
  CellSummary cell;
  cell.summary = population_summary({1.0, 1.0, 1.0});
  const std::string csv = summary_csv(c, {"s=1", "s=2"}, {cell});
  const std::string row = csv.substr(csv.find('\n') + 1);
  EXPECT_NE(row.find(",1,,1,0,"), std::string::npos) << row;
}
