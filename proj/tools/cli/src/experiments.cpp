#include "fluxlattice/cli/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <thread>

namespace fluxlattice::cli {

namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Nulls instead of NaN/inf so results.json stays strict JSON.
json number_or_null(double v)
{
    return std::isfinite(v) ? json(v) : json(nullptr);
}

struct Region {
    int lo;
    int span;
};

// Smallest site range containing every contact.
Region coupling_region(const std::vector<AtomSpec>& atoms)
{
    int lo = std::numeric_limits<int>::max();
    int hi = std::numeric_limits<int>::min();
    for (const AtomSpec& a : atoms) {
        for (int m : a.contacts()) {
            lo = std::min(lo, m);
            hi = std::max(hi, m);
        }
    }
    return {lo, hi - lo};
}

std::vector<int> contact_sites(const std::vector<AtomSpec>& atoms)
{
    std::vector<int> out;
    for (const AtomSpec& a : atoms) {
        for (int m : a.contacts())
            out.push_back(m);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

EvolveOptions evolve_options(const RunConfig& c)
{
    EvolveOptions o;
    o.propagator = c.run.propagator;
    o.tolerance = c.run.tolerance;
    return o;
}

Table atom_table(const EvolutionRecord& rec)
{
    Table t;
    t.name = "P_e";
    t.columns.push_back("t");
    if (rec.p_atom.size() == 1) {
        t.columns.push_back("P_e");
    } else {
        for (std::size_t j = 0; j < rec.p_atom.size(); ++j)
            t.columns.push_back("P_e_" + std::to_string(j));
    }
    std::vector<double> row(t.columns.size());
    for (std::size_t i = 0; i < rec.sample_count(); ++i) {
        row[0] = rec.times[i];
        for (std::size_t j = 0; j < rec.p_atom.size(); ++j)
            row[j + 1] = rec.p_atom[j][i];
        t.add_row(row);
    }
    return t;
}

Table profile_table(const EvolutionRecord& rec, double t)
{
    Table out;
    out.name = "profile";
    out.columns = {"m", "P_m"};
    const Eigen::VectorXd p = rec.profile(t);
    for (std::size_t i = 0; i < rec.sites.size(); ++i)
        out.add_row({static_cast<double>(rec.sites[i]), p[static_cast<Eigen::Index>(i)]});
    return out;
}

// Norm bookkeeping shared by every timed experiment.
void summarise_norm(const HamiltonianMatrix& h, const EvolutionRecord& rec, double t_measure,
                    json& r)
{
    double dev = 0.0;
    for (double n : rec.total_norm)
        dev = std::max(dev, std::abs(n - 1.0));
    r["hermitian"] = h.is_hermitian();
    r["final_norm"] = rec.total_norm.back();
    r["max_norm_deviation"] = dev;
    r["measure_time"] = rec.times[rec.sample_at(t_measure)];
    r["edge_weight"] = edge_weight(rec, t_measure, 2);
}

// Largest P_e after the first local minimum; NaN if P_e never turns up.
double revival(const std::vector<double>& p)
{
    for (std::size_t i = 1; i + 1 < p.size(); ++i) {
        if (p[i] <= p[i - 1] && p[i] < p[i + 1])
            return *std::max_element(p.begin() + static_cast<std::ptrdiff_t>(i), p.end());
    }
    return kNaN;
}

RunOutput run_band(const RunConfig& c)
{
    const BandParams band = BandParams::from_lattice(c.lattice);
    RunOutput out;
    Table t;
    t.name = "band";
    t.columns = {"k", "omega", "v_g"};
    const int n = c.run.k_points;
    double vmax = 0.0;
    for (int i = 0; i < n; ++i) {
        const double k = -std::numbers::pi + 2.0 * std::numbers::pi * i / (n - 1);
        const double v = group_velocity(band, k);
        vmax = std::max(vmax, std::abs(v));
        t.add_row({k, dispersion(band, k), v});
    }
    out.tables.push_back(std::move(t));

    json& r = out.results;
    r["center"] = band.center();
    r["amplitude"] = band.amplitude();
    r["phase"] = band.phase();
    r["bandwidth"] = band.bandwidth();
    r["band_min"] = band.band_min();
    r["band_max"] = band.band_max();
    r["flat"] = band.is_flat();
    r["max_abs_group_velocity"] = vmax;
    json probes = json::array();
    for (double w : c.run.probe_omega) {
        json p{{"omega", w}};
        if (band.is_flat()) {
            p["roots"] = nullptr;
        } else {
            json roots = json::array();
            for (const BandRoot& root : solve_k(band, w).roots)
                roots.push_back(
                    json{{"k", root.k}, {"v_group", root.v_group}, {"branch", to_string(root.branch)}});
            p["roots"] = std::move(roots);
            try {
                p["density_of_states"] = density_of_states(band, w);
            } catch (const OutOfBandError&) {
                p["density_of_states"] = nullptr;
            }
        }
        probes.push_back(std::move(p));
    }
    r["probes"] = std::move(probes);
    return out;
}

struct Evolved {
    HamiltonianMatrix h;
    EvolutionRecord rec;
};

Evolved evolve_atom(const RunConfig& c)
{
    HamiltonianMatrix h = build_hamiltonian(c);
    EvolutionRecord rec =
        evolve(h, atom_excited_state(h, 0), c.run.t_final, c.run.dt_sample, evolve_options(c));
    return {std::move(h), std::move(rec)};
}

RunOutput run_decay(const RunConfig& c)
{
    auto [h, rec] = evolve_atom(c);
    RunOutput out;
    json& r = out.results;
    summarise_norm(h, rec, c.run.t_final, r);

    const auto& pe = rec.p_atom[0];
    r["p_e_final"] = pe.back();
    r["p_e_min"] = *std::min_element(pe.begin(), pe.end());
    r["revival"] = number_or_null(revival(pe));
    const auto period = oscillation_period(rec, 0);
    r["period"] = period ? json(*period) : json(nullptr);

    const Window w = c.run.plateau_window();
    if (w.t1 <= c.run.t_final + 1e-12) {
        const double plateau = window_mean(rec, 0, w.t0, w.t1);
        r["plateau_mean"] = plateau;
        r["decay_class"] = to_string(classify_decay(plateau));
    }
    if (c.run.fit)
        r["fitted_rate"] = fit_decay_rate(rec, 0, c.run.fit->t0, c.run.fit->t1);

    const AtomSpec& a = c.atoms[0];
    try {
        r["markovian_rate"] = markovian_decay_rate(BandParams::from_lattice(c.lattice), a).total;
    } catch (const NumericalError&) {
        r["markovian_rate"] = nullptr;
    }

    const Region region = coupling_region(c.atoms);
    double conf = 1.0;
    for (double t : rec.times)
        conf = std::min(conf, confinement(rec, t, region.lo, region.lo + region.span));
    r["confinement_min"] = conf;
    if (c.atoms.size() > 1) {
        json finals = json::array();
        for (const auto& series : rec.p_atom)
            finals.push_back(series.back());
        r["p_e_final_all"] = std::move(finals);
    }

    out.tables.push_back(atom_table(rec));
    out.marked_sites = contact_sites(c.atoms);
    out.record = std::move(rec);
    return out;
}

RunOutput run_emission(const RunConfig& c)
{
    auto [h, rec] = evolve_atom(c);
    RunOutput out;
    json& r = out.results;
    const double tm = c.run.measure();
    summarise_norm(h, rec, tm, r);

    const Region region = coupling_region(c.atoms);
    const double C = chirality(rec, tm, region.lo, region.span);
    r["chirality"] = C;
    const EmissionFront front = emission_front(rec, tm, region.lo, region.span, c.run.front_fraction);
    r["front_left"] = front.left;
    r["front_right"] = front.right;
    r["confinement"] = confinement(rec, tm, region.lo, region.lo + region.span);
    r["p_e_measure"] = rec.p_atom[0][rec.sample_at(tm)];
    r["lattice_weight"] = rec.profile(tm).sum();

    out.tables.push_back(atom_table(rec));
    out.tables.push_back(profile_table(rec, tm));
    out.marked_sites = contact_sites(c.atoms);
    out.record = std::move(rec);
    return out;
}

RunOutput run_selfenergy(const RunConfig& c)
{
    const BandParams band = BandParams::from_lattice(c.lattice);
    const AtomSpec& atom = c.atoms[0];
    const bool closed = c.run.method != SelfEnergyMode::Integral;
    const bool integral = c.run.method != SelfEnergyMode::Closed;
    const double g2 = atom.g * atom.g;

    Table t;
    t.name = "selfenergy";
    t.columns = {"omega", "re_closed", "im_closed", "re_integral", "im_integral",
                 "quadrature_error", "markovian_rate"};
    json samples = json::array();
    double worst_rel = 0.0;
    for (double w : c.run.omega) {
        const Complex z(w, c.run.eta);
        Complex sc(kNaN, kNaN), si(kNaN, kNaN);
        double qerr = kNaN;
        if (closed)
            sc = self_energy_closed(band, atom, z).value;
        if (integral) {
            const SelfEnergyResult res = self_energy_integral(band, atom, z);
            si = res.value;
            qerr = res.quadrature_error;
        }
        if (closed && integral) {
            const double scale = std::max(std::abs(sc), 1e-3 * g2);
            worst_rel = std::max(worst_rel, std::abs(sc - si) / scale);
        }
        double markov = kNaN;
        try {
            AtomSpec probe = atom;
            probe.delta = w;
            markov = markovian_decay_rate(band, probe).total;
        } catch (const NumericalError&) {
        }
        t.add_row({w, sc.real(), sc.imag(), si.real(), si.imag(), qerr, markov});
        if (c.run.omega.size() <= 64) {
            const Complex s = closed ? sc : si;
            samples.push_back(json{{"omega", w},
                                   {"re_sigma", s.real()},
                                   {"im_sigma", s.imag()},
                                   {"abs_sigma_over_g2", g2 > 0.0 ? number_or_null(std::abs(s) / g2)
                                                                  : json(nullptr)},
                                   {"im_sigma_over_g2", g2 > 0.0 ? number_or_null(s.imag() / g2)
                                                                 : json(nullptr)},
                                   {"re_integral", number_or_null(si.real())},
                                   {"im_integral", number_or_null(si.imag())},
                                   {"markovian_rate", number_or_null(markov)}});
        }
    }
    RunOutput out;
    out.results["points"] = c.run.omega.size();
    out.results["eta"] = c.run.eta;
    if (closed && integral)
        out.results["max_relative_difference"] = worst_rel;
    out.results["samples"] = std::move(samples);
    out.tables.push_back(std::move(t));
    return out;
}

RunOutput run_scatter(const RunConfig& c)
{
    const BandParams band = BandParams::from_lattice(c.lattice);
    const AtomSpec& atom = c.atoms[0];
    Table t;
    t.name = "spectra";
    t.columns = {"omega", "T_L", "T_R", "R_L", "R_R", "flux_residual_L", "flux_residual_R"};
    double max_dt = 0.0, max_flux = 0.0, max_res = 0.0, max_cond = 0.0;
    double min_t = 1.0, max_loss = 0.0;
    for (double w : c.run.omega) {
        const ScatteringSolution L = solve_scattering(band, atom, w, Incidence::LeftIncident);
        const ScatteringSolution R = solve_scattering(band, atom, w, Incidence::RightIncident);
        t.add_row({w, L.T, R.T, L.reflectance(), R.reflectance(), L.flux_residual, R.flux_residual});
        max_dt = std::max(max_dt, std::abs(L.T - R.T));
        max_flux = std::max({max_flux, std::abs(L.flux_residual), std::abs(R.flux_residual)});
        max_loss = std::max({max_loss, L.flux_residual, R.flux_residual});
        max_res = std::max({max_res, L.residual, R.residual});
        max_cond = std::max({max_cond, L.condition_number, R.condition_number});
        min_t = std::min({min_t, L.T, R.T});
    }
    RunOutput out;
    json& r = out.results;
    r["points"] = c.run.omega.size();
    r["max_abs_T_difference"] = max_dt;
    r["max_abs_flux_residual"] = max_flux;
    r["max_absorption"] = max_loss;
    r["max_row_residual"] = max_res;
    r["max_condition_number"] = max_cond;
    r["min_transmission"] = min_t;
    r["reciprocal"] = max_dt < 1e-10;
    out.tables.push_back(std::move(t));
    return out;
}

RunOutput run_wavepacket(const RunConfig& c)
{
    const BandParams band = BandParams::from_lattice(c.lattice);
    const WavepacketSpec& wp = *c.run.wavepacket;
    const double v = group_velocity(band, wp.k0);
    if (std::abs(v) < 1e-10)
        throw NumericalError("wavepacket carrier has zero group velocity");
    const Incidence dir = v > 0.0 ? Incidence::LeftIncident : Incidence::RightIncident;
    const Region region = coupling_region(c.atoms);
    const double tm = c.run.measure();

    const HamiltonianMatrix h = build_hamiltonian(c);
    EvolutionRecord rec = evolve(h, gaussian_initial_state(h, wp), c.run.t_final, c.run.dt_sample,
                                 evolve_options(c));

    RunOutput out;
    json& r = out.results;
    summarise_norm(h, rec, tm, r);
    r["incident_from"] = to_string(dir);
    r["carrier_omega"] = dispersion(band, wp.k0);
    r["group_velocity"] = v;

    double max_pe = 0.0;
    json per_atom = json::array();
    for (const auto& series : rec.p_atom) {
        const double m = *std::max_element(series.begin(), series.end());
        per_atom.push_back(m);
        max_pe = std::max(max_pe, m);
    }
    r["max_p_e"] = max_pe;
    r["max_p_e_atoms"] = std::move(per_atom);

    const DynamicTransmission dyn = wavepacket_transmission(rec, region.lo, region.span, dir, tm);
    r["transmitted"] = dyn.transmitted;
    r["reflected"] = dyn.reflected;

    // Same packet with every atom detached: the undelayed reference.
    RunConfig free_cfg = c;
    for (AtomSpec& a : free_cfg.atoms)
        a.g = 0.0;
    const HamiltonianMatrix h0 = build_hamiltonian(free_cfg);
    const EvolutionRecord rec0 =
        evolve(h0, gaussian_initial_state(h0, wp), tm, c.run.dt_sample, evolve_options(c));
    r["free_transmitted"] =
        wavepacket_transmission(rec0, region.lo, region.span, dir, tm).transmitted;

    r["stationary_T"] = nullptr;
    if (c.atoms.size() == 1 && !c.atoms[0].small && c.atoms[0].separation >= 2) {
        try {
            AtomSpec a = c.atoms[0];
            a.site_left = 0;
            r["stationary_T"] = solve_scattering(band, a, dispersion(band, wp.k0), dir).T;
        } catch (const NumericalError&) {
        }
    }

    Table tr;
    tr.name = "transmission";
    tr.columns = {"t", "T_dyn", "R_dyn"};
    for (double t : rec.times) {
        const DynamicTransmission d = wavepacket_transmission(rec, region.lo, region.span, dir, t);
        tr.add_row({t, d.transmitted, d.reflected});
    }
    out.tables.push_back(atom_table(rec));
    out.tables.push_back(std::move(tr));
    out.tables.push_back(profile_table(rec, tm));
    out.marked_sites = contact_sites(c.atoms);
    out.record = std::move(rec);
    return out;
}

} // namespace

const Table* RunOutput::table(const std::string& name) const
{
    for (const Table& t : tables) {
        if (t.name == name)
            return &t;
    }
    return nullptr;
}

HamiltonianMatrix build_hamiltonian(const RunConfig& config)
{
    if (config.model == ModelKind::Exact)
        return build_exact(config.lattice, config.atoms);
    return build_effective(config.lattice, config.atoms);
}

RunOutput execute(const RunConfig& config)
{
    switch (config.experiment) {
    case Experiment::Band: return run_band(config);
    case Experiment::Decay: return run_decay(config);
    case Experiment::Emission: return run_emission(config);
    case Experiment::SelfEnergy: return run_selfenergy(config);
    case Experiment::Scatter: return run_scatter(config);
    case Experiment::Wavepacket: return run_wavepacket(config);
    }
    throw InvalidArgument("unknown experiment");
}

json results_document(const RunConfig& config, const RunOutput& output)
{
    json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["experiment"] = to_string(config.experiment);
    doc["config"] = to_json(config);
    doc["results"] = output.results;
    json files = json::array();
    if (config.wants("csv")) {
        for (const Table& t : output.tables)
            files.push_back(t.name + ".csv");
    }
    if (config.wants("svg") && output.record)
        files.push_back("heatmap.svg");
    files.push_back("results.json");
    doc["artifacts"] = std::move(files);
    return doc;
}

std::vector<std::filesystem::path> write_artifacts(const RunConfig& config, const RunOutput& output,
                                                   const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    if (config.wants("csv")) {
        for (const Table& t : output.tables) {
            const auto path = dir / (t.name + ".csv");
            write_file(path, to_csv(t));
            written.push_back(path);
        }
    }
    if (config.wants("svg") && output.record) {
        HeatmapOptions opts;
        opts.marked_sites = output.marked_sites;
        opts.title = config.description.empty() ? std::string(to_string(config.experiment))
                                                : config.description;
        const auto path = dir / "heatmap.svg";
        render_heatmap(*output.record, path, opts);
        written.push_back(path);
    }
    if (config.wants("json")) {
        const auto path = dir / "results.json";
        write_file(path, results_document(config, output).dump(2) + "\n");
        written.push_back(path);
    }
    return written;
}

std::filesystem::path resolve_output_directory(const RunConfig& config,
                                               const std::optional<std::string>& flag)
{
    if (flag && !flag->empty())
        return *flag;
    if (config.output_directory && !config.output_directory->empty())
        return *config.output_directory;
    if (const char* env = std::getenv("FLUXLATTICE_OUT"); env && *env)
        return env;
    return "out";
}

SweepSpec load_sweep(const std::filesystem::path& path)
{
    const json doc = read_json_file(path);
    if (!doc.is_object())
        throw ConfigError("sweep: expected an object");
    for (const auto& item : doc.items()) {
        const std::string& k = item.key();
        if (k != "schema_version" && k != "description" && k != "base" && k != "parameter"
            && k != "values" && k != "output")
            throw ConfigError("sweep: unknown key \"" + k + "\"");
    }
    if (!doc.contains("schema_version") || doc["schema_version"] != kSchemaVersion)
        throw ConfigError("sweep: schema_version must be " + std::to_string(kSchemaVersion));
    for (const char* key : {"base", "parameter", "values"}) {
        if (!doc.contains(key))
            throw ConfigError(std::string("sweep: missing \"") + key + "\"");
    }

    SweepSpec spec;
    if (doc["base"].is_string())
        spec.base = read_json_file(path.parent_path() / doc["base"].get<std::string>());
    else if (doc["base"].is_object())
        spec.base = doc["base"];
    else
        throw ConfigError("sweep.base: expected an object or a file name");
    if (!doc["parameter"].is_string())
        throw ConfigError("sweep.parameter: expected a JSON pointer string");
    spec.parameter = doc["parameter"].get<std::string>();
    if (!doc["values"].is_array() || doc["values"].empty())
        throw ConfigError("sweep.values: expected a non-empty array");
    spec.values = doc["values"].get<std::vector<json>>();
    if (doc.contains("description") && doc["description"].is_string())
        spec.description = doc["description"].get<std::string>();
    if (doc.contains("output")) {
        const json& o = doc["output"];
        if (!o.is_object() || (o.size() == 1 && !o.contains("directory")) || o.size() > 1)
            throw ConfigError("sweep.output: only \"directory\" is allowed");
        if (o.contains("directory"))
            spec.output_directory = o["directory"].get<std::string>();
    }
    return spec;
}

std::vector<RunConfig> sweep_configs(const SweepSpec& spec)
{
    std::vector<RunConfig> out;
    for (std::size_t i = 0; i < spec.values.size(); ++i) {
        json doc = spec.base;
        apply_override(doc, spec.parameter, spec.values[i]);
        try {
            out.push_back(parse_config(doc));
        } catch (const ConfigError& e) {
            throw ConfigError("sweep point " + std::to_string(i) + ": " + e.what());
        }
    }
    return out;
}

std::vector<SweepPoint> execute_sweep(const SweepSpec& spec, int jobs)
{
    std::vector<SweepPoint> points;
    for (RunConfig& c : sweep_configs(spec))
        points.push_back(SweepPoint{std::move(c), std::nullopt, {}, 0});

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < points.size(); i = next++) {
            SweepPoint& p = points[i];
            try {
                p.output = execute(p.config);
            } catch (const NumericalError& e) {
                p.error = e.what();
                p.exit_code = 2;
            } catch (const std::exception& e) {
                p.error = e.what();
                p.exit_code = 1;
            }
        }
    };
    const int n = std::clamp(jobs, 1, static_cast<int>(points.size()));
    std::vector<std::thread> pool;
    for (int i = 1; i < n; ++i)
        pool.emplace_back(worker);
    worker();
    for (std::thread& t : pool)
        t.join();
    return points;
}

double sweep_value(const json& value)
{
    if (value.is_number())
        return value.get<double>();
    if (value.is_boolean())
        return value.get<bool>() ? 1.0 : 0.0;
    if (value.is_string()) {
        try {
            return parse_phase_literal(value.get<std::string>());
        } catch (const ConfigError&) {
        }
    }
    return kNaN;
}

Table sweep_table(const SweepSpec& spec, const std::vector<SweepPoint>& points)
{
    Table t;
    t.name = "sweep";
    t.columns = {"index", "value"};
    std::vector<std::string> keys;
    for (const SweepPoint& p : points) {
        if (!p.output)
            continue;
        for (const auto& item : p.output->results.items()) {
            if (item.value().is_number() || item.value().is_boolean())
                keys.push_back(item.key());
        }
        break;
    }
    t.columns.insert(t.columns.end(), keys.begin(), keys.end());
    for (std::size_t i = 0; i < points.size(); ++i) {
        std::vector<double> row{static_cast<double>(i), sweep_value(spec.values[i])};
        for (const std::string& k : keys) {
            double v = kNaN;
            if (points[i].output) {
                const json& r = points[i].output->results;
                if (auto it = r.find(k); it != r.end()) {
                    if (it->is_number())
                        v = it->get<double>();
                    else if (it->is_boolean())
                        v = it->get<bool>() ? 1.0 : 0.0;
                }
            }
            row.push_back(v);
        }
        t.add_row(row);
    }
    return t;
}

} // namespace fluxlattice::cli
