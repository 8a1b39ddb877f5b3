#include "blockcv/config.hpp"
#include "blockcv/errors.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace blockcv;

namespace {

const char* base = R"({
  "name": "t",
  "lattice": {"rows": 6, "cols": 6},
  "replications": 3,
  "seed": 9,
  "covariates": 3,
  "dgp": {"family": "sar", "scheme": "rook", "beta": [1, 1, 0.9], "sigma2": 5},
  "candidates": {
    "A": {"name": "a", "family": "sar", "columns": [0, 1]},
    "B": {"name": "b", "family": "sar", "scheme": "queen", "columns": [0, 2]}
  },
  "priors": {"beta_variance": 4},
  "scenarios": [{"label": "low", "dgp": {"rho": 0.1}}, {"label": "high", "dgp": {"rho": 0.9}}],
  "design": {"type": "blocked", "sizes": [1, 2, 3]}
})";

std::string with(const std::string& from, const std::string& to) {
  std::string s = base;
  const auto at = s.find(from);
  EXPECT_NE(at, std::string::npos) << from;
  return s.replace(at, from.size(), to);
}

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

} // namespace

TEST(Config, ParsesAndMergesScenarios) {
  const ExperimentConfig c = parse_config(base);
  ASSERT_EQ(c.scenarios.size(), 2u);
  EXPECT_EQ(c.scenarios[0].label, "low");
  EXPECT_DOUBLE_EQ(c.scenarios[0].dgp.rho, 0.1);
  EXPECT_DOUBLE_EQ(c.scenarios[1].dgp.rho, 0.9);
  EXPECT_DOUBLE_EQ(c.scenarios[1].dgp.sigma2, 5.0);
  EXPECT_EQ(c.scenarios[1].b.scheme, Scheme::queen);
  EXPECT_EQ(c.scenarios[0].a.columns, (std::vector<int>{0, 1}));
  EXPECT_DOUBLE_EQ(c.scenarios[0].a.prior.beta_variance, 4.0);
  EXPECT_DOUBLE_EQ(c.scenarios[0].a.prior.sigma2_variance, 10.0);
  EXPECT_EQ(c.design.values, (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(c.seed, 9u);
  EXPECT_FALSE(c.trim.has_value());
}

TEST(Config, SingleScenarioWhenNoneListed) {
  std::string s = base;
  const auto from = s.find("\"scenarios\"");
  const auto to = s.find("\"design\"");
  s.erase(from, to - from);
  s = s.replace(s.find("\"sigma2\": 5"), 11, "\"sigma2\": 5, \"rho\": 0.5");
  const ExperimentConfig c = parse_config(s);
  ASSERT_EQ(c.scenarios.size(), 1u);
  EXPECT_EQ(c.scenarios[0].label, "base");
}

TEST(Config, ReportsEveryProblem) {
  std::string s = with("\"seed\": 9", "\"seed\": 9, \"colour\": 1");
  s = s.replace(s.find("[1, 2, 3]"), 9, "[1, 4]");
  const std::string msg = error_of(s);
  EXPECT_NE(msg.find("/colour: unknown key"), std::string::npos) << msg;
  EXPECT_TRUE(error_of(with("[1, 2, 3]", "[4]")).find("does not divide") != std::string::npos);
  EXPECT_NE(error_of(with("[1, 1, 0.9]", "[1, 1]")).find("beta"), std::string::npos);
  EXPECT_NE(error_of(with("\"replications\": 3", "\"replications\": 0")).find("replications"),
            std::string::npos);
  EXPECT_NE(error_of(with("\"columns\": [0, 2]", "\"columns\": [0, 5]")).find("column 5"),
            std::string::npos);
  EXPECT_NE(error_of(with("\"family\": \"sar\", \"scheme\": \"rook\"",
                          "\"family\": \"car\", \"scheme\": \"rook\""))
                .find("family"),
            std::string::npos);
  EXPECT_NE(error_of(with("\"rho\": 0.9", "\"rho\": 1.0")).find("rho"), std::string::npos);
  EXPECT_NE(error_of("{ not json").find("JSON"), std::string::npos);
  EXPECT_NE(error_of(with("\"seed\": 9", "\"seed\": \"nine\"")).find("/seed"), std::string::npos);
}

TEST(Config, EchoRoundTrips) {
  ExperimentConfig c = parse_config(with("\"sizes\": [1, 2, 3]", "\"sizes\": [1, 2, 3], \"halo_scheme\": \"queen\""));
  c.trim = 0.98;
  c.scenarios[0].a.clamp.rho = 0.3;
  const std::string once = to_json(c);
  const ExperimentConfig again = parse_config(once);
  EXPECT_EQ(to_json(again), once);
  EXPECT_EQ(*again.trim, 0.98);
  EXPECT_EQ(*again.scenarios[0].a.clamp.rho, 0.3);
}

TEST(Config, HaloSchemeDefaults) {
  ExperimentConfig c = parse_config(base);
  EXPECT_EQ(halo_scheme_for(c, c.scenarios[0]), Scheme::queen);
  c.scenarios[0].b.scheme = Scheme::rook;
  EXPECT_EQ(halo_scheme_for(c, c.scenarios[0]), Scheme::rook);
  c.design.halo_scheme = Scheme::queen;
  EXPECT_EQ(halo_scheme_for(c, c.scenarios[0]), Scheme::queen);
  c.design.halo_scheme.reset();
  c.scenarios[0].a.family = c.scenarios[0].b.family = Family::kernel;
  EXPECT_EQ(halo_scheme_for(c, c.scenarios[0]), Scheme::rook);
  const auto cells = design_cells(c, c.scenarios[0]);
  ASSERT_EQ(cells.size(), 3u);
  EXPECT_EQ(describe(cells[2]), "s=3");
}

TEST(Config, ClusteredDesign) {
  const ExperimentConfig c = parse_config(
      with(R"("type": "blocked", "sizes": [1, 2, 3])", R"("type": "clustered", "clusters": [4, 36])"));
  EXPECT_EQ(c.design.type, DesignType::clustered);
  EXPECT_NE(error_of(with(R"("type": "blocked", "sizes": [1, 2, 3])",
                          R"("type": "clustered", "clusters": [37])")),
            "");
}

TEST(Config, LoadFile) {
  const auto path = std::filesystem::temp_directory_path() / "blockcv_config_test.json";
  std::ofstream(path) << base;
  EXPECT_EQ(load_config(path).name, "t");
  std::filesystem::remove(path);
  EXPECT_THROW(load_config(path), std::runtime_error);
}

TEST(Config, ShippedPresetsValidate) {
  const std::filesystem::path dir = BLOCKCV_CONFIG_DIR;
  int seen = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".json" || entry.path().filename() == "schema.json")
      continue;
    EXPECT_NO_THROW(load_config(entry.path())) << entry.path();
    ++seen;
  }
  EXPECT_GT(seen, 5);
}
