#pragma once

#include "blockcv/harness.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace blockcv {

/// One row per (scenario, design, mode) cell with a defined summary.
std::string summary_csv(const ExperimentConfig& config, const std::vector<std::string>& designs,
                        const std::vector<CellSummary>& cells);

/// One row per selection record, numbers printed to round-trip exactly.
std::string replications_csv(const ResultSet& results);

/// One row per (replication, design, fold, model) fit.
std::string scores_csv(const ResultSet& results);

/// Config echo, failure counts and runtime metadata.
std::string manifest_json(const ResultSet& results);

/// Parses replications.csv back into records. Throws std::runtime_error on
/// malformed input or labels missing from `config`.
std::vector<SelectionRecord> parse_replications(const std::string& text,
                                                const ExperimentConfig& config);

/// Config echoed in a manifest.
ExperimentConfig config_from_manifest(const std::string& manifest_text);

/// Writes `text` to `path` via a temporary file and rename.
void write_atomic(const std::filesystem::path& path, const std::string& text);

/// summary.csv, replications.csv, scores.csv and manifest.json in `dir`
/// (created if absent).
void write_results(const std::filesystem::path& dir, const ResultSet& results);

/// Recomputes summary.csv content from a results directory, optionally with
/// a different trim fraction.
std::string resummarize(const std::filesystem::path& dir,
                        std::optional<double> trim_override = std::nullopt);

/// "s=4 joint: accuracy 0.81, Z 1.2 (n=200)"-style line per cell.
std::vector<std::string> summary_lines(const ExperimentConfig& config,
                                       const std::vector<std::string>& designs,
                                       const std::vector<CellSummary>& cells);

} // namespace blockcv
