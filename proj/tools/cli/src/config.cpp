#include "fluxlattice/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <numbers>
#include <set>

namespace fluxlattice::cli {

namespace {

using nlohmann::json;

constexpr double kPi = std::numbers::pi;

void reject_unknown(const json& obj, std::string_view where,
                    std::initializer_list<std::string_view> allowed)
{
    for (const auto& item : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
            throw ConfigError(std::string(where) + ": unknown key \"" + item.key() + "\"");
    }
}

const json& require_object(const json& doc, std::string_view where)
{
    if (!doc.is_object())
        throw ConfigError(std::string(where) + ": expected an object");
    return doc;
}

double as_number(const json& v, const std::string& where)
{
    if (!v.is_number())
        throw ConfigError(where + ": expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x))
        throw ConfigError(where + ": must be finite");
    return x;
}

int as_int(const json& v, const std::string& where)
{
    const double x = as_number(v, where);
    if (x != std::floor(x) || std::abs(x) > 1e9)
        throw ConfigError(where + ": expected an integer");
    return static_cast<int>(x);
}

bool as_bool(const json& v, const std::string& where)
{
    if (!v.is_boolean())
        throw ConfigError(where + ": expected true or false");
    return v.get<bool>();
}

std::string as_string(const json& v, const std::string& where)
{
    if (!v.is_string())
        throw ConfigError(where + ": expected a string");
    return v.get<std::string>();
}

double as_phase(const json& v, const std::string& where)
{
    if (v.is_number())
        return as_number(v, where);
    if (v.is_string()) {
        try {
            return parse_phase_literal(v.get<std::string>());
        } catch (const ConfigError& e) {
            throw ConfigError(where + ": " + e.what());
        }
    }
    throw ConfigError(where + ": expected a phase (number or literal like \"0.5pi\")");
}

template <class F>
void maybe(const json& obj, const char* key, F&& f)
{
    if (auto it = obj.find(key); it != obj.end())
        f(*it);
}

bool parse_double(std::string_view text, double& out)
{
    if (text.empty())
        return false;
    if (text.front() == '+')
        text.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size();
}

LatticeSpec parse_lattice(const json& doc)
{
    require_object(doc, "lattice");
    reject_unknown(doc, "lattice",
                   {"J", "beta", "lambda", "delta_ab", "phi", "kappa", "m_total", "m_min"});
    const double J = doc.contains("J") ? as_number(doc["J"], "lattice.J") : 1.0;
    const double phi = doc.contains("phi") ? as_phase(doc["phi"], "lattice.phi") : 0.0;
    const int m_total = doc.contains("m_total") ? as_int(doc["m_total"], "lattice.m_total") : 200;

    const bool has_beta = doc.contains("beta");
    const bool has_ab = doc.contains("lambda") || doc.contains("delta_ab");
    if (has_beta && has_ab)
        throw ConfigError("lattice: give either beta or lambda/delta_ab, not both");

    LatticeSpec lat;
    if (has_ab) {
        lat.J = J;
        lat.phi = phi;
        lat.m_total = m_total;
        lat.lambda = doc.contains("lambda") ? as_number(doc["lambda"], "lattice.lambda") : 0.0;
        lat.delta_ab =
            doc.contains("delta_ab") ? as_number(doc["delta_ab"], "lattice.delta_ab") : 1.0;
        lat.m_min = -m_total / 2;
    } else {
        const double beta = has_beta ? as_number(doc["beta"], "lattice.beta") : 1.0;
        lat = LatticeSpec::with_beta(J, beta, phi, m_total);
    }
    maybe(doc, "kappa", [&](const json& v) { lat.kappa = as_number(v, "lattice.kappa"); });
    maybe(doc, "m_min", [&](const json& v) { lat.m_min = as_int(v, "lattice.m_min"); });
    return lat;
}

std::vector<AtomSpec> parse_atoms(const json& doc)
{
    if (!doc.is_array())
        throw ConfigError("atoms: expected an array");
    std::vector<AtomSpec> atoms;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const std::string at = "atoms[" + std::to_string(i) + "]";
        const json& a = require_object(doc[i], at);
        reject_unknown(a, at,
                       {"delta", "g", "site_left", "separation", "phi_extra", "gamma", "small",
                        "count"});
        AtomSpec atom;
        maybe(a, "delta", [&](const json& v) { atom.delta = as_number(v, at + ".delta"); });
        maybe(a, "g", [&](const json& v) { atom.g = as_number(v, at + ".g"); });
        maybe(a, "site_left", [&](const json& v) { atom.site_left = as_int(v, at + ".site_left"); });
        maybe(a, "separation",
              [&](const json& v) { atom.separation = as_int(v, at + ".separation"); });
        maybe(a, "phi_extra", [&](const json& v) { atom.phi_extra = as_phase(v, at + ".phi_extra"); });
        maybe(a, "gamma", [&](const json& v) { atom.gamma = as_number(v, at + ".gamma"); });
        maybe(a, "small", [&](const json& v) { atom.small = as_bool(v, at + ".small"); });
        int count = 1;
        maybe(a, "count", [&](const json& v) { count = as_int(v, at + ".count"); });
        if (count < 1 || count > 64)
            throw ConfigError(at + ".count: must lie in [1, 64]");
        atoms.insert(atoms.end(), static_cast<std::size_t>(count), atom);
    }
    return atoms;
}

Window parse_window(const json& v, const std::string& where)
{
    if (!v.is_array() || v.size() != 2)
        throw ConfigError(where + ": expected [t0, t1]");
    Window w{as_number(v[0], where + "[0]"), as_number(v[1], where + "[1]")};
    if (!(w.t0 >= 0.0 && w.t1 > w.t0))
        throw ConfigError(where + ": need 0 <= t0 < t1");
    return w;
}

Propagator parse_propagator(const json& v)
{
    const std::string s = as_string(v, "run.propagator");
    if (s == "automatic")
        return Propagator::Automatic;
    if (s == "spectral")
        return Propagator::Spectral;
    if (s == "runge_kutta")
        return Propagator::RungeKutta;
    throw ConfigError("run.propagator: expected automatic, spectral or runge_kutta");
}

const char* propagator_name(Propagator p)
{
    switch (p) {
    case Propagator::Spectral: return "spectral";
    case Propagator::RungeKutta: return "runge_kutta";
    case Propagator::Automatic: break;
    }
    return "automatic";
}

const char* method_name(SelfEnergyMode m)
{
    switch (m) {
    case SelfEnergyMode::Closed: return "closed";
    case SelfEnergyMode::Integral: return "integral";
    case SelfEnergyMode::Both: break;
    }
    return "both";
}

std::vector<double> linspace(double lo, double hi, int n)
{
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
    return out;
}

// Default grid: the band interior, inset by 1e-3 of the half width so the
// stationary solver never lands on an edge.
json default_omega_grid(const LatticeSpec& lattice)
{
    const BandParams band = BandParams::from_lattice(lattice);
    if (band.is_flat())
        throw ConfigError("run.omega_grid: required for a flat band");
    const double inset = 1e-3 * band.amplitude();
    return json{{"min", band.band_min() + inset}, {"max", band.band_max() - inset}, {"points", 200}};
}

void parse_omega_grid(const json& v, RunSettings& run)
{
    require_object(v, "run.omega_grid");
    if (v.contains("values")) {
        reject_unknown(v, "run.omega_grid", {"values"});
        if (!v["values"].is_array() || v["values"].empty())
            throw ConfigError("run.omega_grid.values: expected a non-empty array");
        run.omega.clear();
        for (std::size_t i = 0; i < v["values"].size(); ++i)
            run.omega.push_back(
                as_number(v["values"][i], "run.omega_grid.values[" + std::to_string(i) + "]"));
        run.omega_grid = json{{"values", run.omega}};
        return;
    }
    reject_unknown(v, "run.omega_grid", {"min", "max", "points"});
    for (const char* key : {"min", "max", "points"}) {
        if (!v.contains(key))
            throw ConfigError(std::string("run.omega_grid: missing \"") + key + "\"");
    }
    const double lo = as_number(v["min"], "run.omega_grid.min");
    const double hi = as_number(v["max"], "run.omega_grid.max");
    const int n = as_int(v["points"], "run.omega_grid.points");
    if (n < 1 || n > 1000000)
        throw ConfigError("run.omega_grid.points: must lie in [1, 1e6]");
    if (n > 1 && !(hi > lo))
        throw ConfigError("run.omega_grid: need max > min");
    run.omega = linspace(lo, hi, n);
    run.omega_grid = json{{"min", lo}, {"max", hi}, {"points", n}};
}

void parse_run(const json& doc, Experiment e, const LatticeSpec& lattice, RunSettings& run)
{
    require_object(doc, "run");
    switch (e) {
    case Experiment::Band: reject_unknown(doc, "run", {"k_points", "probe_omega"}); break;
    case Experiment::Decay:
        reject_unknown(doc, "run", {"t_final", "dt_sample", "plateau_window", "fit_window",
                                    "propagator", "tolerance"});
        break;
    case Experiment::Emission:
        reject_unknown(doc, "run", {"t_final", "dt_sample", "measure_time", "front_fraction",
                                    "propagator", "tolerance"});
        break;
    case Experiment::SelfEnergy: reject_unknown(doc, "run", {"omega_grid", "eta", "method"}); break;
    case Experiment::Scatter: reject_unknown(doc, "run", {"omega_grid"}); break;
    case Experiment::Wavepacket:
        reject_unknown(doc, "run", {"t_final", "dt_sample", "measure_time", "wavepacket",
                                    "propagator", "tolerance"});
        break;
    }

    maybe(doc, "t_final", [&](const json& v) { run.t_final = as_number(v, "run.t_final"); });
    maybe(doc, "dt_sample", [&](const json& v) { run.dt_sample = as_number(v, "run.dt_sample"); });
    maybe(doc, "measure_time",
          [&](const json& v) { run.measure_time = as_number(v, "run.measure_time"); });
    maybe(doc, "plateau_window",
          [&](const json& v) { run.plateau = parse_window(v, "run.plateau_window"); });
    maybe(doc, "fit_window", [&](const json& v) { run.fit = parse_window(v, "run.fit_window"); });
    maybe(doc, "k_points", [&](const json& v) { run.k_points = as_int(v, "run.k_points"); });
    maybe(doc, "probe_omega", [&](const json& v) {
        if (!v.is_array())
            throw ConfigError("run.probe_omega: expected an array");
        for (std::size_t i = 0; i < v.size(); ++i)
            run.probe_omega.push_back(as_number(v[i], "run.probe_omega[" + std::to_string(i) + "]"));
    });
    maybe(doc, "eta", [&](const json& v) { run.eta = as_number(v, "run.eta"); });
    maybe(doc, "method", [&](const json& v) {
        const std::string s = as_string(v, "run.method");
        if (s == "closed")
            run.method = SelfEnergyMode::Closed;
        else if (s == "integral")
            run.method = SelfEnergyMode::Integral;
        else if (s == "both")
            run.method = SelfEnergyMode::Both;
        else
            throw ConfigError("run.method: expected closed, integral or both");
    });
    maybe(doc, "front_fraction",
          [&](const json& v) { run.front_fraction = as_number(v, "run.front_fraction"); });
    maybe(doc, "propagator", [&](const json& v) { run.propagator = parse_propagator(v); });
    maybe(doc, "tolerance", [&](const json& v) { run.tolerance = as_number(v, "run.tolerance"); });
    maybe(doc, "wavepacket", [&](const json& v) {
        require_object(v, "run.wavepacket");
        reject_unknown(v, "run.wavepacket", {"m0", "width", "k0"});
        WavepacketSpec wp;
        maybe(v, "m0", [&](const json& x) { wp.m0 = as_int(x, "run.wavepacket.m0"); });
        maybe(v, "width", [&](const json& x) { wp.width = as_number(x, "run.wavepacket.width"); });
        maybe(v, "k0", [&](const json& x) { wp.k0 = as_phase(x, "run.wavepacket.k0"); });
        run.wavepacket = wp;
    });

    if (e == Experiment::SelfEnergy || e == Experiment::Scatter)
        parse_omega_grid(doc.contains("omega_grid") ? doc["omega_grid"] : default_omega_grid(lattice),
                         run);
}

void check_run(const RunConfig& c)
{
    const RunSettings& r = c.run;
    const bool timed = c.experiment == Experiment::Decay || c.experiment == Experiment::Emission
                       || c.experiment == Experiment::Wavepacket;
    if (timed) {
        if (!(r.t_final > 0.0))
            throw ConfigError("run.t_final: must be positive");
        if (!(r.dt_sample > 0.0) || r.t_final / r.dt_sample > 1e6)
            throw ConfigError("run.dt_sample: must be positive and give at most 1e6 samples");
        if (r.measure_time && !(*r.measure_time > 0.0 && *r.measure_time <= r.t_final))
            throw ConfigError("run.measure_time: must lie in (0, t_final]");
        for (const auto& [w, name] : {std::pair{r.plateau, "run.plateau_window"},
                                      std::pair{r.fit, "run.fit_window"}}) {
            if (w && w->t1 > r.t_final + 1e-12)
                throw ConfigError(std::string(name) + ": extends past t_final");
        }
        if (!(r.tolerance > 0.0))
            throw ConfigError("run.tolerance: must be positive");
        if (!(r.front_fraction > 0.0 && r.front_fraction < 1.0))
            throw ConfigError("run.front_fraction: must lie in (0, 1)");
    }
    if (c.experiment == Experiment::Band && (r.k_points < 2 || r.k_points > 1000000))
        throw ConfigError("run.k_points: must lie in [2, 1e6]");
    if (c.experiment == Experiment::SelfEnergy && !(r.eta > 0.0))
        throw ConfigError("run.eta: must be positive");

    const std::size_t n = c.atoms.size();
    switch (c.experiment) {
    case Experiment::Band: break;
    case Experiment::Decay:
    case Experiment::Emission:
        if (n == 0)
            throw ConfigError("atoms: at least one atom is required");
        break;
    case Experiment::SelfEnergy:
        if (n != 1)
            throw ConfigError("atoms: self-energy takes exactly one atom");
        break;
    case Experiment::Scatter:
        if (n != 1 || c.atoms[0].small)
            throw ConfigError("atoms: scattering takes exactly one giant atom");
        if (c.atoms[0].separation < 2)
            throw ConfigError("atoms[0].separation: scattering needs N >= 2");
        break;
    case Experiment::Wavepacket:
        if (!r.wavepacket)
            throw ConfigError("run.wavepacket: required for the wavepacket experiment");
        if (n == 0)
            throw ConfigError("atoms: at least one atom is required");
        break;
    }
}

json atom_to_json(const AtomSpec& a)
{
    return json{{"delta", a.delta},         {"g", a.g},         {"site_left", a.site_left},
                {"separation", a.separation}, {"phi_extra", a.phi_extra}, {"gamma", a.gamma},
                {"small", a.small}};
}

} // namespace

const char* to_string(Experiment e) noexcept
{
    switch (e) {
    case Experiment::Band: return "band";
    case Experiment::Decay: return "decay";
    case Experiment::Emission: return "emission";
    case Experiment::SelfEnergy: return "selfenergy";
    case Experiment::Scatter: return "scatter";
    case Experiment::Wavepacket: return "wavepacket";
    }
    return "?";
}

std::optional<Experiment> experiment_from_string(std::string_view name)
{
    for (Experiment e : {Experiment::Band, Experiment::Decay, Experiment::Emission,
                         Experiment::SelfEnergy, Experiment::Scatter, Experiment::Wavepacket}) {
        if (name == to_string(e))
            return e;
    }
    return std::nullopt;
}

bool RunConfig::wants(std::string_view format) const
{
    return std::find(formats.begin(), formats.end(), format) != formats.end();
}

double parse_phase_literal(std::string_view text)
{
    const std::string original(text);
    auto fail = [&]() -> double {
        throw ConfigError("cannot parse phase \"" + original + "\"");
    };
    while (!text.empty() && text.front() == ' ')
        text.remove_prefix(1);
    while (!text.empty() && text.back() == ' ')
        text.remove_suffix(1);

    double value = 0.0;
    const std::size_t pi_at = text.find("pi");
    if (pi_at == std::string_view::npos)
        return parse_double(text, value) ? value : fail();

    // [coef]pi[/den], with coef "", "-", "+" or a number (optional '*').
    std::string_view coef = text.substr(0, pi_at);
    std::string_view rest = text.substr(pi_at + 2);
    if (!coef.empty() && coef.back() == '*')
        coef.remove_suffix(1);
    double c = 1.0;
    if (coef == "-")
        c = -1.0;
    else if (!coef.empty() && coef != "+" && !parse_double(coef, c))
        return fail();
    double den = 1.0;
    if (!rest.empty()) {
        if (rest.front() != '/' || !parse_double(rest.substr(1), den) || den == 0.0)
            return fail();
    }
    value = c * kPi / den;
    return std::isfinite(value) ? value : fail();
}

RunConfig parse_config(const json& doc, std::optional<Experiment> expected)
{
    require_object(doc, "config");
    reject_unknown(doc, "config",
                   {"schema_version", "experiment", "description", "model", "lattice", "atoms",
                    "run", "output"});
    if (!doc.contains("schema_version"))
        throw ConfigError("config: missing schema_version");
    if (as_int(doc["schema_version"], "schema_version") != kSchemaVersion)
        throw ConfigError("schema_version: only version " + std::to_string(kSchemaVersion)
                          + " is supported");

    RunConfig c;
    if (doc.contains("experiment")) {
        const auto e = experiment_from_string(as_string(doc["experiment"], "experiment"));
        if (!e)
            throw ConfigError("experiment: unknown experiment \""
                              + doc["experiment"].get<std::string>() + "\"");
        if (expected && *expected != *e)
            throw ConfigError(std::string("experiment: config is for \"") + to_string(*e)
                              + "\" but the subcommand is \"" + to_string(*expected) + "\"");
        c.experiment = *e;
    } else if (expected) {
        c.experiment = *expected;
    } else {
        throw ConfigError("config: missing experiment");
    }

    maybe(doc, "description",
          [&](const json& v) { c.description = as_string(v, "description"); });
    maybe(doc, "model", [&](const json& v) {
        const std::string s = as_string(v, "model");
        if (s == "effective")
            c.model = ModelKind::Effective;
        else if (s == "exact")
            c.model = ModelKind::Exact;
        else
            throw ConfigError("model: expected effective or exact");
    });

    c.lattice = parse_lattice(doc.contains("lattice") ? doc["lattice"] : json::object());
    if (doc.contains("atoms"))
        c.atoms = parse_atoms(doc["atoms"]);

    try {
        c.lattice.validate();
        if (c.model == ModelKind::Effective)
            (void)c.lattice.beta();
        for (const AtomSpec& a : c.atoms)
            a.validate(c.lattice);
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }

    parse_run(doc.contains("run") ? doc["run"] : json::object(), c.experiment, c.lattice, c.run);

    maybe(doc, "output", [&](const json& v) {
        require_object(v, "output");
        reject_unknown(v, "output", {"directory", "formats"});
        maybe(v, "directory",
              [&](const json& d) { c.output_directory = as_string(d, "output.directory"); });
        maybe(v, "formats", [&](const json& f) {
            if (!f.is_array())
                throw ConfigError("output.formats: expected an array");
            c.formats.clear();
            for (std::size_t i = 0; i < f.size(); ++i) {
                std::string s = as_string(f[i], "output.formats[" + std::to_string(i) + "]");
                if (s != "csv" && s != "json" && s != "svg")
                    throw ConfigError("output.formats: expected csv, json or svg");
                if (!c.wants(s))
                    c.formats.push_back(std::move(s));
            }
        });
    });

    check_run(c);
    return c;
}

json to_json(const RunConfig& c)
{
    json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["experiment"] = to_string(c.experiment);
    if (!c.description.empty())
        doc["description"] = c.description;
    doc["model"] = c.model == ModelKind::Exact ? "exact" : "effective";
    const LatticeSpec& l = c.lattice;
    doc["lattice"] = json{{"J", l.J},         {"lambda", l.lambda}, {"delta_ab", l.delta_ab},
                          {"phi", l.phi},     {"kappa", l.kappa},   {"m_total", l.m_total},
                          {"m_min", l.m_min}};
    doc["atoms"] = json::array();
    for (const AtomSpec& a : c.atoms)
        doc["atoms"].push_back(atom_to_json(a));

    const RunSettings& r = c.run;
    json run = json::object();
    auto timed = [&] {
        run["t_final"] = r.t_final;
        run["dt_sample"] = r.dt_sample;
        run["propagator"] = propagator_name(r.propagator);
        run["tolerance"] = r.tolerance;
    };
    switch (c.experiment) {
    case Experiment::Band:
        run["k_points"] = r.k_points;
        run["probe_omega"] = r.probe_omega;
        break;
    case Experiment::Decay: {
        timed();
        const Window p = r.plateau_window();
        run["plateau_window"] = {p.t0, p.t1};
        if (r.fit)
            run["fit_window"] = {r.fit->t0, r.fit->t1};
        break;
    }
    case Experiment::Emission:
        timed();
        run["measure_time"] = r.measure();
        run["front_fraction"] = r.front_fraction;
        break;
    case Experiment::SelfEnergy:
        run["omega_grid"] = r.omega_grid;
        run["eta"] = r.eta;
        run["method"] = method_name(r.method);
        break;
    case Experiment::Scatter: run["omega_grid"] = r.omega_grid; break;
    case Experiment::Wavepacket:
        timed();
        run["measure_time"] = r.measure();
        run["wavepacket"] =
            json{{"m0", r.wavepacket->m0}, {"width", r.wavepacket->width}, {"k0", r.wavepacket->k0}};
        break;
    }
    doc["run"] = std::move(run);

    json out{{"formats", c.formats}};
    if (c.output_directory)
        out["directory"] = *c.output_directory;
    doc["output"] = std::move(out);
    return doc;
}

json read_json_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void apply_override(json& doc, const std::string& pointer, const json& value)
{
    if (pointer.empty() || pointer.front() != '/')
        throw ConfigError("override path \"" + pointer + "\" must start with '/'");
    try {
        const json::json_pointer ptr(pointer);
        if (!ptr.parent_pointer().empty() && !doc.contains(ptr.parent_pointer()))
            doc[ptr.parent_pointer()] = json::object();
        const json& parent = doc[ptr.parent_pointer()];
        if (parent.is_array()) {
            const std::string& last = ptr.back();
            const bool index = !last.empty()
                               && std::all_of(last.begin(), last.end(),
                                              [](char ch) { return ch >= '0' && ch <= '9'; });
            if (!index || std::stoul(last) >= parent.size())
                throw ConfigError("override path \"" + pointer + "\" indexes past the array");
        }
        doc[ptr] = value;
    } catch (const json::exception& e) {
        throw ConfigError("override path \"" + pointer + "\": " + e.what());
    }
}

json parse_scalar(std::string_view text)
{
    if (text == "true")
        return true;
    if (text == "false")
        return false;
    double x = 0.0;
    if (parse_double(text, x)) {
        if (x == std::floor(x) && std::abs(x) < 1e15 && text.find_first_of(".eE") == std::string_view::npos)
            return static_cast<long long>(x);
        return x;
    }
    if (!text.empty() && (text.front() == '[' || text.front() == '{')) {
        try {
            return json::parse(text);
        } catch (const json::parse_error& e) {
            throw ConfigError("cannot parse value \"" + std::string(text) + "\": " + e.what());
        }
    }
    return std::string(text);
}

} // namespace fluxlattice::cli
