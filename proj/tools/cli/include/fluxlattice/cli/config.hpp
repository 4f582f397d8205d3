#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fluxlattice/fluxlattice.hpp"

namespace fluxlattice::cli {

inline constexpr int kSchemaVersion = 1;

// Anything wrong with the requested run before numerics start.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Experiment { Band, Decay, Emission, SelfEnergy, Scatter, Wavepacket };

const char* to_string(Experiment e) noexcept;
std::optional<Experiment> experiment_from_string(std::string_view name);

enum class ModelKind { Effective, Exact };

enum class SelfEnergyMode { Closed, Integral, Both };

struct Window {
    double t0 = 0.0;
    double t1 = 0.0;
};

struct RunSettings {
    double t_final = 20.0;
    double dt_sample = 0.05;
    std::optional<double> measure_time; // defaults to t_final
    std::optional<Window> plateau;      // defaults to [0.8 t_final, t_final]
    std::optional<Window> fit;          // decay rate fitted only when set
    int k_points = 400;
    std::vector<double> probe_omega;
    nlohmann::json omega_grid;          // normalised spec: {min,max,points} or {values}
    std::vector<double> omega;          // expanded grid
    double eta = 1e-6;
    SelfEnergyMode method = SelfEnergyMode::Both;
    std::optional<WavepacketSpec> wavepacket;
    double front_fraction = 0.01;
    Propagator propagator = Propagator::Automatic;
    double tolerance = 1e-10;

    double measure() const { return measure_time.value_or(t_final); }
    Window plateau_window() const { return plateau.value_or(Window{0.8 * t_final, t_final}); }
};

struct RunConfig {
    Experiment experiment = Experiment::Band;
    ModelKind model = ModelKind::Effective;
    std::string description;
    LatticeSpec lattice;
    std::vector<AtomSpec> atoms;
    RunSettings run;
    std::optional<std::string> output_directory;
    std::vector<std::string> formats{"csv", "json", "svg"};

    bool wants(std::string_view format) const;
};

/// Radians from a number or a literal such as "pi", "-pi/2", "0.75pi",
/// "3pi/4".
double parse_phase_literal(std::string_view text);

/// Validates a config document. Unknown keys, wrong types and parameters the
/// library rejects all raise ConfigError. `expected` pins the experiment
/// (the subcommand); a missing "experiment" key then defaults to it.
RunConfig parse_config(const nlohmann::json& doc, std::optional<Experiment> expected = {});

/// Fully explicit form of a config; parse_config(to_json(c)) reproduces c.
nlohmann::json to_json(const RunConfig& config);

nlohmann::json read_json_file(const std::filesystem::path& path);

/// Sets the value at a JSON pointer ("/atoms/0/g"), creating missing
/// object members along the way.
void apply_override(nlohmann::json& doc, const std::string& pointer, const nlohmann::json& value);

/// Flag text to JSON: numbers, booleans and JSON arrays/objects parse as
/// such; anything else (phase literals, names) stays a string.
nlohmann::json parse_scalar(std::string_view text);

} // namespace fluxlattice::cli
