#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fluxlattice/cli/config.hpp"
#include "fluxlattice/cli/output.hpp"

namespace fluxlattice::cli {

/// Everything one run produces before anything touches the disk.
struct RunOutput {
    nlohmann::json results; // scalar results and small per-point summaries
    std::vector<Table> tables;
    std::optional<EvolutionRecord> record; // timed experiments only
    std::vector<int> marked_sites;         // coupling sites of all atoms

    const Table* table(const std::string& name) const;
};

HamiltonianMatrix build_hamiltonian(const RunConfig& config);

/// Runs the experiment. Library errors propagate unchanged.
RunOutput execute(const RunConfig& config);

/// The document written as results.json; its "config" member re-parses
/// with parse_config.
nlohmann::json results_document(const RunConfig& config, const RunOutput& output);

/// Writes the requested formats into `dir` (created if missing) and returns
/// the paths written.
std::vector<std::filesystem::path> write_artifacts(const RunConfig& config, const RunOutput& output,
                                                   const std::filesystem::path& dir);

/// --out flag, then output.directory, then $FLUXLATTICE_OUT, then "out".
std::filesystem::path resolve_output_directory(const RunConfig& config,
                                               const std::optional<std::string>& flag);

/// One parameter varied over a list of values on top of a base config.
struct SweepSpec {
    nlohmann::json base;
    std::string parameter; // JSON pointer into the base config
    std::vector<nlohmann::json> values;
    std::optional<std::string> output_directory;
    std::string description;
};

/// Reads a sweep file: {"schema_version", "base" (object or path relative to
/// the sweep file), "parameter", "values", optional "output", "description"}.
SweepSpec load_sweep(const std::filesystem::path& path);

/// Validated config of every sweep point, in order.
std::vector<RunConfig> sweep_configs(const SweepSpec& spec);

struct SweepPoint {
    RunConfig config;
    std::optional<RunOutput> output;
    std::string error;
    int exit_code = 0;
};

/// Runs every point on up to `jobs` worker threads. Results keep the order
/// of spec.values regardless of scheduling.
std::vector<SweepPoint> execute_sweep(const SweepSpec& spec, int jobs);

/// Numeric value used for the sweep table's value column.
double sweep_value(const nlohmann::json& value);

/// sweep.csv: index, value, then every numeric top-level result of the
/// first successful point.
Table sweep_table(const SweepSpec& spec, const std::vector<SweepPoint>& points);

} // namespace fluxlattice::cli
