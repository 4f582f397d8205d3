#include "fluxlattice/cli/app.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <system_error>
#include <vector>

#include <CLI11.hpp>

#include "fluxlattice/cli/experiments.hpp"

namespace fluxlattice::cli {

namespace {

using nlohmann::json;

enum class Target { Root, Lattice, Atom, Run };

struct FlagSpec {
    const char* flag;
    Target target;
    const char* path; // relative to the target
    const char* help;
};

// Typed overrides, applied in this order after the config file is read.
constexpr FlagSpec kFlags[] = {
    {"--model", Target::Root, "/model", "effective or exact"},
    {"--J", Target::Lattice, "/J", "B-B hopping"},
    {"--beta", Target::Lattice, "/beta", "effective on-site shift (replaces lambda/delta_ab)"},
    {"--lambda", Target::Lattice, "/lambda", "A-B coupling"},
    {"--delta-ab", Target::Lattice, "/delta_ab", "A-B detuning"},
    {"--phi", Target::Lattice, "/phi", "flux per plaquette (radians or e.g. 0.5pi)"},
    {"--kappa", Target::Lattice, "/kappa", "A-site loss"},
    {"--m-total", Target::Lattice, "/m_total", "number of B sites"},
    {"--m-min", Target::Lattice, "/m_min", "index of the first B site"},
    {"--delta", Target::Atom, "/delta", "atomic detuning (every atom)"},
    {"--g", Target::Atom, "/g", "coupling per contact (every atom)"},
    {"--site-left", Target::Atom, "/site_left", "first contact site (every atom)"},
    {"--N", Target::Atom, "/separation", "contact separation (every atom)"},
    {"--phi-extra", Target::Atom, "/phi_extra", "extra phase on the right contact"},
    {"--gamma", Target::Atom, "/gamma", "intrinsic atomic decay"},
    {"--small", Target::Atom, "/small", "true for a single-contact atom"},
    {"--count", Target::Atom, "/count", "identical copies of each atom entry"},
    {"--t-final", Target::Run, "/t_final", "evolution time"},
    {"--dt", Target::Run, "/dt_sample", "sampling interval"},
    {"--measure-time", Target::Run, "/measure_time", "time at which profiles are measured"},
    {"--k-points", Target::Run, "/k_points", "number of k samples"},
    {"--omega-min", Target::Run, "/omega_grid/min", "lower end of the omega grid"},
    {"--omega-max", Target::Run, "/omega_grid/max", "upper end of the omega grid"},
    {"--omega-points", Target::Run, "/omega_grid/points", "number of omega samples"},
    {"--eta", Target::Run, "/eta", "imaginary part of the probe energy"},
    {"--method", Target::Run, "/method", "closed, integral or both"},
    {"--m0", Target::Run, "/wavepacket/m0", "wavepacket centre"},
    {"--width", Target::Run, "/wavepacket/width", "wavepacket width"},
    {"--k0", Target::Run, "/wavepacket/k0", "wavepacket carrier wave vector"},
    {"--propagator", Target::Run, "/propagator", "automatic, spectral or runge_kutta"},
};

struct CommonOptions {
    std::optional<std::string> config;
    std::optional<std::string> out;
    std::optional<std::string> formats;
    std::vector<std::string> sets;
    bool quiet = false;
};

struct ExperimentCommand {
    Experiment experiment;
    CLI::App* app = nullptr;
    CommonOptions common;
    std::map<std::string, std::optional<std::string>> flags;
};

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::string cur;
    int depth = 0;
    for (char c : s) {
        if (c == '[' || c == '{')
            ++depth;
        if (c == ']' || c == '}')
            --depth;
        if (c == ',' && depth == 0) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty() || !out.empty())
        out.push_back(cur);
    return out;
}

void apply_set(json& doc, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("--set expects POINTER=VALUE, got \"" + assignment + "\"");
    apply_override(doc, assignment.substr(0, eq), parse_scalar(assignment.substr(eq + 1)));
}

void apply_formats(json& doc, const std::string& list)
{
    json formats = json::array();
    for (const std::string& f : split_list(list))
        formats.push_back(f);
    apply_override(doc, "/output/formats", formats);
}

json base_document(const CommonOptions& common)
{
    if (common.config)
        return read_json_file(*common.config);
    return json{{"schema_version", kSchemaVersion}};
}

void apply_flags(json& doc, const std::map<std::string, std::optional<std::string>>& flags)
{
    for (const FlagSpec& f : kFlags) {
        const auto& value = flags.at(f.flag);
        if (!value)
            continue;
        const json v = parse_scalar(*value);
        switch (f.target) {
        case Target::Root: apply_override(doc, f.path, v); break;
        case Target::Lattice: {
            if (!doc.contains("lattice") || !doc["lattice"].is_object())
                doc["lattice"] = json::object();
            json& lat = doc["lattice"];
            const std::string key = std::string(f.path).substr(1);
            if (key == "beta") {
                lat.erase("lambda");
                lat.erase("delta_ab");
            } else if (key == "lambda" || key == "delta_ab") {
                lat.erase("beta");
            }
            apply_override(doc, std::string("/lattice") + f.path, v);
            break;
        }
        case Target::Atom: {
            if (!doc.contains("atoms") || !doc["atoms"].is_array() || doc["atoms"].empty())
                doc["atoms"] = json::array({json::object()});
            for (std::size_t i = 0; i < doc["atoms"].size(); ++i)
                apply_override(doc, "/atoms/" + std::to_string(i) + f.path, v);
            break;
        }
        case Target::Run: apply_override(doc, std::string("/run") + f.path, v); break;
        }
    }
}

void add_common(CLI::App* app, CommonOptions& common)
{
    app->add_option("-c,--config", common.config, "JSON run configuration");
    app->add_option("-o,--out", common.out,
                    "output directory (default: config, then $FLUXLATTICE_OUT, then ./out)");
    app->add_option("--format", common.formats, "comma-separated subset of csv,json,svg");
    app->add_option("--set", common.sets, "override any config field: /json/pointer=value");
    app->add_flag("-q,--quiet", common.quiet, "print nothing on success");
}

void report(std::ostream& out, const std::vector<std::filesystem::path>& written,
            const json& results, bool quiet)
{
    if (quiet)
        return;
    for (const auto& p : written)
        out << "wrote " << p.string() << '\n';
    out << results.dump() << '\n';
}

int run_experiment(ExperimentCommand& cmd, std::ostream& out)
{
    json doc = base_document(cmd.common);
    apply_flags(doc, cmd.flags);
    if (cmd.common.formats)
        apply_formats(doc, *cmd.common.formats);
    for (const std::string& s : cmd.common.sets)
        apply_set(doc, s);
    const RunConfig config = parse_config(doc, cmd.experiment);
    const RunOutput output = execute(config);
    const auto dir = resolve_output_directory(config, cmd.common.out);
    report(out, write_artifacts(config, output, dir), output.results, cmd.common.quiet);
    return kExitOk;
}

struct SweepCommand {
    CLI::App* app = nullptr;
    CommonOptions common;
    std::optional<std::string> parameter;
    std::optional<std::string> values;
    int jobs = 1;
};

int run_sweep(SweepCommand& cmd, std::ostream& out, std::ostream& err)
{
    if (!cmd.common.config)
        throw ConfigError("sweep: --config is required");
    const json file = read_json_file(*cmd.common.config);
    SweepSpec spec;
    if (file.is_object() && file.contains("base")) {
        spec = load_sweep(*cmd.common.config);
    } else {
        spec.base = file;
    }
    if (cmd.parameter)
        spec.parameter = *cmd.parameter;
    if (cmd.values) {
        spec.values.clear();
        for (const std::string& v : split_list(*cmd.values))
            spec.values.push_back(parse_scalar(v));
    }
    if (spec.parameter.empty() || spec.values.empty())
        throw ConfigError("sweep: need a parameter and at least one value");
    if (cmd.common.formats)
        apply_formats(spec.base, *cmd.common.formats);
    for (const std::string& s : cmd.common.sets)
        apply_set(spec.base, s);
    if (cmd.jobs < 1)
        throw ConfigError("sweep: --jobs must be at least 1");

    const std::vector<SweepPoint> points = execute_sweep(spec, cmd.jobs);

    std::filesystem::path dir;
    if (cmd.common.out)
        dir = *cmd.common.out;
    else if (spec.output_directory)
        dir = *spec.output_directory;
    else
        dir = resolve_output_directory(points.front().config, std::nullopt);

    std::vector<std::filesystem::path> written;
    json runs = json::array();
    int code = kExitOk;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const SweepPoint& p = points[i];
        char name[32];
        std::snprintf(name, sizeof name, "run_%03zu", i);
        json entry{{"index", i}, {"value", spec.values[i]}, {"directory", name}};
        if (p.output) {
            const auto files = write_artifacts(p.config, *p.output, dir / name);
            written.insert(written.end(), files.begin(), files.end());
            entry["results"] = p.output->results;
        } else {
            entry["error"] = p.error;
            err << "sweep point " << i << ": " << p.error << '\n';
            code = std::max(code, p.exit_code);
        }
        runs.push_back(std::move(entry));
    }
    std::filesystem::create_directories(dir);
    const Table table = sweep_table(spec, points);
    write_file(dir / "sweep.csv", to_csv(table));
    written.push_back(dir / "sweep.csv");
    json summary{{"schema_version", kSchemaVersion},
                 {"description", spec.description},
                 {"parameter", spec.parameter},
                 {"values", spec.values},
                 {"runs", runs}};
    write_file(dir / "sweep.json", summary.dump(2) + "\n");
    written.push_back(dir / "sweep.json");
    if (!cmd.common.quiet) {
        for (const auto& p : written)
            out << "wrote " << p.string() << '\n';
    }
    return code;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Giant atoms in a flux-threaded sawtooth lattice: band structure, decay, "
                 "emission, self-energy, scattering and wavepacket runs",
                 "fluxlattice"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "fluxlattice 0.1.0");

    struct Entry {
        Experiment e;
        const char* help;
    };
    const Entry entries[] = {
        {Experiment::Band, "dispersion and group velocity over the Brillouin zone"},
        {Experiment::Decay, "atomic excitation P_e(t) from an initially excited atom"},
        {Experiment::Emission, "lattice emission profile and chirality"},
        {Experiment::SelfEnergy, "self-energy of the atom on an omega grid"},
        {Experiment::Scatter, "single-photon transmission and reflection spectra"},
        {Experiment::Wavepacket, "Gaussian wavepacket scattering off the atoms"},
    };
    std::vector<std::unique_ptr<ExperimentCommand>> commands;
    for (const Entry& entry : entries) {
        auto cmd = std::make_unique<ExperimentCommand>();
        cmd->experiment = entry.e;
        cmd->app = app.add_subcommand(to_string(entry.e), entry.help);
        add_common(cmd->app, cmd->common);
        for (const FlagSpec& f : kFlags) {
            auto& slot = cmd->flags[f.flag];
            cmd->app->add_option(f.flag, slot, f.help);
        }
        commands.push_back(std::move(cmd));
    }
    SweepCommand sweep;
    sweep.app = app.add_subcommand("sweep", "run one config over a list of parameter values");
    add_common(sweep.app, sweep.common);
    sweep.app->add_option("--param", sweep.parameter, "JSON pointer of the swept field");
    sweep.app->add_option("--values", sweep.values, "comma-separated values");
    sweep.app->add_option("-j,--jobs", sweep.jobs, "worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (sweep.app->parsed())
            return run_sweep(sweep, out, err);
        for (auto& cmd : commands) {
            if (cmd->app->parsed())
                return run_experiment(*cmd, out);
        }
        return kExitConfig;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const InvalidArgument& e) {
        err << "invalid argument: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::system_error& e) {
        err << "output error: " << e.what() << '\n';
        return kExitConfig;
    }
}

} // namespace fluxlattice::cli
