#include "blockcv/report.hpp"

#include "blockcv/errors.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace blockcv {

using nlohmann::json;

namespace {

std::string field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos)
    return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"')
      out += '"';
    out += c;
  }
  return out + '"';
}

std::string exact(double v) { return std::isfinite(v) ? fmt::format("{:.17g}", v) : ""; }
std::string exact(const std::optional<double>& v) { return v ? exact(*v) : ""; }
std::string brief(double v) { return fmt::format("{:.10g}", v); }

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cur;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(cur));
      cur.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (any || !cur.empty()) {
        row.push_back(std::move(cur));
        rows.push_back(std::move(row));
      }
      row.clear();
      cur.clear();
      any = false;
    } else {
      cur += c;
      any = true;
    }
  }
  if (quoted)
    throw std::runtime_error("csv: unterminated quoted field");
  if (any || !cur.empty()) {
    row.push_back(std::move(cur));
    rows.push_back(std::move(row));
  }
  return rows;
}

double number(const std::string& s) {
  if (s.empty())
    return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size())
    throw std::runtime_error("csv: malformed number '" + s + "'");
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

constexpr const char* replication_header =
    "scenario,design,replication,failed,elpd_a_joint,elpd_b_joint,stat_joint,z_hat_joint,"
    "elpd_a_pointwise,elpd_b_pointwise,stat_pointwise,z_hat_pointwise,failure";

} // namespace

std::string summary_csv(const ExperimentConfig& config, const std::vector<std::string>& designs,
                        const std::vector<CellSummary>& cells) {
  std::string out =
      "scenario,dgp,design,mode,replications,failures,n_effective,n_trimmed,accuracy,z,mean,sd,"
      "trim\n";
  for (const CellSummary& c : cells) {
    if (!c.summary)
      continue;
    const Scenario& s = config.scenarios.at(c.scenario);
    const PopulationSummary& p = *c.summary;
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", field(s.label),
                       field(s.dgp.describe()), field(designs.at(c.design)), to_string(c.mode),
                       p.n + c.failures, c.failures, p.n, p.n_trimmed, brief(p.accuracy),
                       p.z ? brief(*p.z) : "", brief(p.mean), brief(p.sd),
                       p.trim ? brief(*p.trim) : "");
  }
  return out;
}

std::vector<std::string> summary_lines(const ExperimentConfig& config,
                                       const std::vector<std::string>& designs,
                                       const std::vector<CellSummary>& cells) {
  std::vector<std::string> lines;
  for (const CellSummary& c : cells) {
    const Scenario& s = config.scenarios.at(c.scenario);
    const std::string head = fmt::format("{} ({}) {} {:<9}", s.label, s.dgp.describe(),
                                         designs.at(c.design), to_string(c.mode));
    if (!c.summary) {
      lines.push_back(fmt::format("{} undefined ({} failed replications)", head, c.failures));
      continue;
    }
    const PopulationSummary& p = *c.summary;
    lines.push_back(fmt::format("{} accuracy {:.3f}  Z {}  mean {:.4g}  sd {:.4g}  n {}", head,
                                p.accuracy, p.z ? fmt::format("{:.3f}", *p.z) : "-", p.mean,
                                p.sd, p.n));
  }
  return lines;
}

std::string replications_csv(const ResultSet& rs) {
  std::string out = std::string(replication_header) + "\n";
  for (const SelectionRecord& r : rs.records) {
    out += fmt::format("{},{},{},{}", field(rs.config.scenarios.at(r.scenario).label),
                       field(rs.design_labels.at(r.design)), r.replication, r.failed ? 1 : 0);
    for (ScoreMode mode : score_modes) {
      const auto i = static_cast<std::size_t>(mode);
      out += fmt::format(",{},{},{},{}", exact(r.elpd_a[i]), exact(r.elpd_b[i]),
                         exact(r.stat[i]), exact(r.z_hat[i]));
    }
    out += "," + field(r.failure) + "\n";
  }
  return out;
}

std::string scores_csv(const ResultSet& rs) {
  std::string out = "scenario,design,replication,fold,model,n_test,failed,joint,pointwise,"
                    "converged,attempts,iterations,gradient_norm,error\n";
  for (const FoldRecord& f : rs.folds) {
    const Scenario& s = rs.config.scenarios.at(f.scenario);
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", field(s.label),
                       field(rs.design_labels.at(f.design)), f.replication, f.score.fold,
                       field(f.model == 0 ? s.a.name : s.b.name), f.score.n_test,
                       f.score.failed ? 1 : 0, exact(f.score.joint), exact(f.score.pointwise),
                       f.converged ? 1 : 0, f.attempts, f.iterations, exact(f.gradient_norm),
                       field(f.error));
  }
  return out;
}

std::string manifest_json(const ResultSet& rs) {
  json j;
  j["name"] = rs.config.name;
  j["version"] = rs.runtime.version;
  j["seed"] = rs.config.seed;
  j["config"] = json::parse(to_json(rs.config));
  j["designs"] = rs.design_labels;
  json cells = json::array();
  for (const CellSummary& c : rs.cells)
    cells.push_back({{"scenario", rs.config.scenarios.at(c.scenario).label},
                     {"design", rs.design_labels.at(c.design)},
                     {"mode", std::string(to_string(c.mode))},
                     {"failures", c.failures},
                     {"defined", c.summary.has_value()}});
  json messages = json::array();
  for (const SelectionRecord& r : rs.records)
    if (r.failed && messages.size() < 50)
      messages.push_back({{"scenario", rs.config.scenarios.at(r.scenario).label},
                          {"design", rs.design_labels.at(r.design)},
                          {"replication", r.replication},
                          {"message", r.failure}});
  j["failures"] = {{"records", rs.records.size()},
                   {"failed", rs.failed_records},
                   {"rate", rs.failure_rate},
                   {"threshold", rs.config.max_failure_rate},
                   {"exceeded", rs.failure_exceeded},
                   {"cells", cells},
                   {"messages", messages}};
  j["runtime"] = {{"started", rs.runtime.started},
                  {"seconds", rs.runtime.seconds},
                  {"parallelism", rs.runtime.parallelism}};
  j["files"] = {"summary.csv", "replications.csv", "scores.csv"};
  return j.dump(2) + "\n";
}

std::vector<SelectionRecord> parse_replications(const std::string& text,
                                                const ExperimentConfig& config) {
  const auto rows = parse_csv(text);
  if (rows.empty() || fmt::format("{}", fmt::join(rows[0], ",")) != replication_header)
    throw std::runtime_error("replications.csv: unexpected header");
  std::map<std::string, std::size_t> scenario_index;
  for (std::size_t i = 0; i < config.scenarios.size(); ++i)
    scenario_index[config.scenarios[i].label] = i;
  std::map<std::string, std::size_t> design_index;
  const auto labels = design_labels(config);
  for (std::size_t i = 0; i < labels.size(); ++i)
    design_index[labels[i]] = i;

  std::vector<SelectionRecord> records;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto& row = rows[k];
    if (row.size() != 13)
      throw std::runtime_error(fmt::format("replications.csv: line {} has {} fields", k + 1,
                                           row.size()));
    SelectionRecord r;
    const auto s = scenario_index.find(row[0]);
    const auto d = design_index.find(row[1]);
    if (s == scenario_index.end() || d == design_index.end())
      throw std::runtime_error(
          fmt::format("replications.csv: line {} names an unknown cell", k + 1));
    r.scenario = s->second;
    r.design = d->second;
    r.replication = std::stoi(row[2]);
    r.failed = row[3] == "1";
    for (std::size_t i = 0; i < 2; ++i) {
      r.elpd_a[i] = number(row[4 + 4 * i]);
      r.elpd_b[i] = number(row[5 + 4 * i]);
      r.stat[i] = number(row[6 + 4 * i]);
      if (!row[7 + 4 * i].empty())
        r.z_hat[i] = number(row[7 + 4 * i]);
    }
    r.failure = row[12];
    records.push_back(std::move(r));
  }
  return records;
}

ExperimentConfig config_from_manifest(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!j.contains("config"))
    throw std::runtime_error("manifest has no config echo");
  return parse_config(j["config"].dump());
}

void write_atomic(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << text;
    out.flush();
    if (!out)
      throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

void write_results(const std::filesystem::path& dir, const ResultSet& rs) {
  std::filesystem::create_directories(dir);
  write_atomic(dir / "replications.csv", replications_csv(rs));
  write_atomic(dir / "scores.csv", scores_csv(rs));
  write_atomic(dir / "summary.csv", summary_csv(rs.config, rs.design_labels, rs.cells));
  write_atomic(dir / "manifest.json", manifest_json(rs));
}

std::string resummarize(const std::filesystem::path& dir, std::optional<double> trim_override) {
  ExperimentConfig config = config_from_manifest(read_file(dir / "manifest.json"));
  if (trim_override)
    config.trim = trim_override;
  const auto records = parse_replications(read_file(dir / "replications.csv"), config);
  const auto labels = design_labels(config);
  return summary_csv(config, labels, summarize_records(config, labels.size(), records));
}

} // namespace blockcv
