#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "fluxlattice/cli/app.hpp"
#include "fluxlattice/cli/config.hpp"
#include "fluxlattice/cli/experiments.hpp"
#include "fluxlattice/cli/output.hpp"

using namespace fluxlattice;
using namespace fluxlattice::cli;
using nlohmann::json;
using std::numbers::pi;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = FLUXLATTICE_CONFIG_DIR;

// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
public:
    TempDir()
    {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path()
                / ("fluxlattice-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& s) const { return path_ / s; }

private:
    fs::path path_;
};

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult run(std::vector<std::string> args)
{
    args.insert(args.begin(), "fluxlattice");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string first_line(const std::string& s)
{
    return s.substr(0, s.find('\n'));
}

json minimal(const std::string& experiment)
{
    return json{{"schema_version", 1},
                {"experiment", experiment},
                {"lattice", {{"J", 1}, {"beta", 1}, {"phi", "0.5pi"}, {"m_total", 60}}},
                {"atoms", json::array({{{"delta", 4}, {"g", 0.2}, {"site_left", 0}, {"separation", 2}}})},
                {"run", json::object()}};
}

} // namespace

TEST_CASE("phase literals")
{
    CHECK(parse_phase_literal("pi") == doctest::Approx(pi));
    CHECK(parse_phase_literal("-pi/2") == doctest::Approx(-pi / 2));
    CHECK(parse_phase_literal("0.75pi") == doctest::Approx(0.75 * pi));
    CHECK(parse_phase_literal("3pi/4") == doctest::Approx(0.75 * pi));
    CHECK(parse_phase_literal("1.25") == doctest::Approx(1.25));
    CHECK_THROWS_AS(parse_phase_literal("half"), ConfigError);
    CHECK_THROWS_AS(parse_phase_literal("pi/0"), ConfigError);

    auto doc = minimal("emission");
    doc["atoms"][0]["phi_extra"] = "pi/8";
    CHECK(parse_config(doc).atoms[0].phi_extra == doctest::Approx(pi / 8));
}

TEST_CASE("config validation")
{
    CHECK_NOTHROW(parse_config(minimal("emission")));

    SUBCASE("unknown keys at every level")
    {
        for (const char* ptr : {"/bogus", "/lattice/bogus", "/atoms/0/bogus", "/run/bogus"}) {
            auto doc = minimal("emission");
            apply_override(doc, ptr, 1);
            CHECK_THROWS_AS(parse_config(doc), ConfigError);
        }
        // Keys valid for another experiment are still rejected.
        auto doc = minimal("emission");
        doc["run"]["omega_grid"] = {{"min", 0}, {"max", 1}, {"points", 3}};
        CHECK_THROWS_AS(parse_config(doc), ConfigError);
    }
    SUBCASE("schema version")
    {
        auto doc = minimal("emission");
        doc["schema_version"] = 2;
        CHECK_THROWS_AS(parse_config(doc), ConfigError);
        doc.erase("schema_version");
        CHECK_THROWS_AS(parse_config(doc), ConfigError);
    }
    SUBCASE("experiment pinned by the subcommand")
    {
        auto doc = minimal("emission");
        CHECK_THROWS_AS(parse_config(doc, Experiment::Decay), ConfigError);
        doc.erase("experiment");
        CHECK(parse_config(doc, Experiment::Decay).experiment == Experiment::Decay);
    }
    SUBCASE("lattice given two ways")
    {
        auto doc = minimal("emission");
        doc["lattice"]["lambda"] = 10;
        doc["lattice"]["delta_ab"] = 100;
        CHECK_THROWS_AS(parse_config(doc), ConfigError);
        doc["lattice"].erase("beta");
        const auto c = parse_config(doc);
        CHECK(c.lattice.beta() == doctest::Approx(1.0));
    }
    SUBCASE("library preconditions surface as config errors")
    {
        auto doc = minimal("emission");
        doc["atoms"][0]["site_left"] = 29;
        CHECK_THROWS_AS(parse_config(doc), ConfigError);
        doc = minimal("emission");
        doc["lattice"]["m_total"] = "many";
        CHECK_THROWS_AS(parse_config(doc), ConfigError);
        doc = minimal("scatter");
        doc["atoms"][0]["separation"] = 1;
        CHECK_THROWS_AS(parse_config(doc), ConfigError);
        doc = minimal("wavepacket");
        CHECK_THROWS_AS(parse_config(doc), ConfigError);
    }
}

TEST_CASE("explicit config round-trips")
{
    for (const auto& entry : fs::directory_iterator(kConfigs)) {
        const auto doc = read_json_file(entry.path());
        if (doc.contains("parameter"))
            continue;
        CAPTURE(entry.path().filename().string());
        const auto config = parse_config(doc);
        const json explicit_form = to_json(config);
        CHECK(to_json(parse_config(explicit_form)) == explicit_form);
    }
}

TEST_CASE("overrides and scalar parsing")
{
    json doc = json::object();
    apply_override(doc, "/atoms/0/g", 0.5);
    CHECK(doc["atoms"][0]["g"] == 0.5);
    apply_override(doc, "/lattice/phi", "pi");
    CHECK(doc["lattice"]["phi"] == "pi");

    CHECK(parse_scalar("1.5").is_number());
    CHECK(parse_scalar("true").is_boolean());
    CHECK(parse_scalar("0.5pi").is_string());
    CHECK(parse_scalar("[1, 2]").is_array());
    CHECK(parse_scalar("effective") == "effective");
}

TEST_CASE("number formatting and CSV")
{
    CHECK(format_number(0.1) == "0.10000000000000001");
    CHECK(format_number(0.0) == "0");
    CHECK(format_number(-2.5) == "-2.5");
    CHECK(format_number(std::nan("")) == "nan");
    CHECK(format_number(-INFINITY) == "-inf");

    Table t{"demo", {"a", "b"}, {}};
    t.add_row({1.0, 0.5});
    t.add_row({2.0, 1e-20});
    CHECK(t.rows() == 2);
    CHECK(to_csv(t) == "a,b\n1,0.5\n2,9.9999999999999995e-21\n");
}

TEST_CASE("band subcommand from flags")
{
    TempDir dir;
    const auto r = run({"band", "--J", "1", "--beta", "1", "--phi", "0.5pi", "--k-points", "400", "-o",
                        dir.path().string(), "-q"});
    REQUIRE(r.code == 0);
    const std::string csv = slurp(dir / "band.csv");
    CHECK(first_line(csv) == "k,omega,v_g");
    CHECK(csv.find('\r') == std::string::npos);
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);
    int rows = 0;
    const BandParams band{1.0, 1.0, pi / 2};
    while (std::getline(lines, line)) {
        double k = 0, w = 0, v = 0;
        REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf", &k, &w, &v) == 3);
        CHECK(std::abs(w - dispersion(band, k)) < 1e-12);
        CHECK(std::abs(v - group_velocity(band, k)) < 1e-12);
        ++rows;
    }
    CHECK(rows == 400);
    CHECK(fs::exists(dir / "results.json"));
}

TEST_CASE("decay subcommand writes the population series")
{
    TempDir dir;
    const auto r = run({"decay", "-c", (kConfigs / "fig2a_phi0_n4.json").string(), "-o",
                        dir.path().string(), "-q"});
    REQUIRE(r.code == 0);
    CHECK(first_line(slurp(dir / "P_e.csv")) == "t,P_e");
    CHECK(fs::exists(dir / "heatmap.svg"));
    const json doc = json::parse(slurp(dir / "results.json"));
    CHECK(doc["experiment"] == "decay");
    CHECK(doc["results"].contains("plateau_mean"));
    // The recorded config re-parses and reproduces itself.
    const auto config = parse_config(doc["config"]);
    CHECK(to_json(config) == doc["config"]);
}

TEST_CASE("scatter subcommand columns")
{
    TempDir dir;
    const auto r = run({"scatter", "--phi", "0.5pi", "--delta", "4", "--gamma", "0.5", "-o",
                        dir.path().string(), "-q"});
    REQUIRE(r.code == 0);
    CHECK(first_line(slurp(dir / "spectra.csv"))
          == "omega,T_L,T_R,R_L,R_R,flux_residual_L,flux_residual_R");
}

TEST_CASE("flags override the config file")
{
    TempDir dir;
    const auto r = run({"emission", "-c", (kConfigs / "fig3a_giant_delta4.json").string(), "--g",
                        "0.1", "--set", "/run/t_final=5", "--set", "/run/measure_time=5", "-o",
                        dir.path().string(), "--format", "json", "-q"});
    REQUIRE(r.code == 0);
    const json doc = json::parse(slurp(dir / "results.json"));
    CHECK(doc["config"]["atoms"][0]["g"] == 0.1);
    CHECK(doc["config"]["run"]["t_final"] == 5.0);
    CHECK_FALSE(fs::exists(dir / "P_e.csv"));
    CHECK_FALSE(fs::exists(dir / "heatmap.svg"));
}

TEST_CASE("FLUXLATTICE_OUT sets the default output directory")
{
    TempDir dir;
    ::setenv("FLUXLATTICE_OUT", dir.path().c_str(), 1);
    const auto r = run({"band", "--phi", "0", "--k-points", "16", "-q"});
    ::unsetenv("FLUXLATTICE_OUT");
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "band.csv"));

    RunConfig config;
    config.output_directory = "from-config";
    ::setenv("FLUXLATTICE_OUT", "from-env", 1);
    CHECK(resolve_output_directory(config, std::string("from-flag")) == "from-flag");
    CHECK(resolve_output_directory(config, std::nullopt) == "from-config");
    config.output_directory.reset();
    CHECK(resolve_output_directory(config, std::nullopt) == "from-env");
    ::unsetenv("FLUXLATTICE_OUT");
    CHECK(resolve_output_directory(config, std::nullopt) == "out");
}

TEST_CASE("exit codes")
{
    TempDir dir;
    const std::string out = dir.path().string();
    CHECK(run({"decay", "-c", (dir / "missing.json").string(), "-o", out}).code == kExitConfig);
    CHECK(run({"frobnicate"}).code == kExitConfig);
    CHECK(run({"decay", "--t-final", "-1", "-o", out}).code == kExitConfig);

    const auto bad = dir / "bad.json";
    auto doc = minimal("emission");
    doc["extra"] = true;
    std::ofstream(bad) << doc.dump();
    CHECK(run({"emission", "-c", bad.string(), "-o", out}).code == kExitConfig);

    // The closed form has no value on a flat band: a numerical failure.
    const auto r = run({"selfenergy", "--g", "0.2", "--phi", "pi", "--omega-min", "1.9",
                        "--omega-max", "2.1", "--omega-points", "3", "-o", out});
    CHECK(r.code == kExitNumerical);
    CHECK(r.err.find("odd multiple") != std::string::npos);
}

TEST_CASE("identical configs give identical bytes")
{
    TempDir a;
    TempDir b;
    const std::string cfg = (kConfigs / "fig3c_small_delta4.json").string();
    REQUIRE(run({"emission", "-c", cfg, "-o", a.path().string(), "-q"}).code == 0);
    REQUIRE(run({"emission", "-c", cfg, "-o", b.path().string(), "-q"}).code == 0);
    for (const char* name : {"P_e.csv", "profile.csv", "results.json", "heatmap.svg"})
        CHECK(slurp(a / name) == slurp(b / name));
}

TEST_CASE("heatmap of an empty record is refused without writing")
{
    TempDir dir;
    const auto path = dir / "empty.svg";
    CHECK_THROWS_AS(render_heatmap(EvolutionRecord{}, path), InvalidArgument);
    CHECK_FALSE(fs::exists(path));
}

TEST_CASE("flat-band heatmap lights only the contact columns")
{
    const auto config = parse_config(read_json_file(kConfigs / "fig2f_flat_emission.json"));
    const auto output = execute(config);
    REQUIRE(output.record.has_value());
    HeatmapOptions options;
    options.marked_sites = output.marked_sites;
    const std::string svg = heatmap_svg(*output.record, options);
    CHECK(svg.rfind("<?xml", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);

    // Cells sit inside the crispEdges group; the first rect is the background.
    const auto begin = svg.find("<g shape-rendering=\"crispEdges\">");
    const auto end = svg.find("</g>", begin);
    REQUIRE(begin != std::string::npos);
    const std::string cells = svg.substr(begin, end - begin);
    const std::regex rect_x("<rect x=\"([0-9.]+)\" y=\"[0-9.]+\" width=\"([0-9.]+)\"");
    std::set<std::string> xs;
    int count = 0;
    for (auto it = std::sregex_iterator(cells.begin(), cells.end(), rect_x); it != std::sregex_iterator();
         ++it) {
        if (count++ == 0)
            continue;
        xs.insert((*it)[1].str());
        CHECK((*it)[2].str() == "3.20");
    }
    CHECK(count > 1);
    // 200 sites over 640 px: site 0 is column 100, site 2 column 102.
    CHECK(xs == std::set<std::string>{"390.00", "396.40"});
}

TEST_CASE("sweep results do not depend on the worker count")
{
    const auto spec = load_sweep(kConfigs / "fig5_phase_sweep.json");
    REQUIRE(spec.values.size() == 5);
    const auto serial = execute_sweep(spec, 1);
    const auto parallel = execute_sweep(spec, 3);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        REQUIRE(serial[i].output.has_value());
        REQUIRE(parallel[i].output.has_value());
        CHECK(serial[i].output->results == parallel[i].output->results);
    }
    CHECK(to_csv(sweep_table(spec, serial)) == to_csv(sweep_table(spec, parallel)));
}

TEST_CASE("sweep subcommand layout")
{
    TempDir dir;
    const auto sweep = dir / "sweep.json";
    json doc{{"schema_version", 1},
             {"base", minimal("emission")},
             {"parameter", "/atoms/0/delta"},
             {"values", {3.0, 4.0}}};
    doc["base"]["run"] = {{"t_final", 2}};
    std::ofstream(sweep) << doc.dump();
    const auto r = run({"sweep", "-c", sweep.string(), "-o", (dir / "out").string(), "-j", "2", "-q"});
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "out" / "run_000" / "results.json"));
    CHECK(fs::exists(dir / "out" / "run_001" / "P_e.csv"));
    const std::string csv = slurp(dir / "out" / "sweep.csv");
    CHECK(first_line(csv).rfind("index,value", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    const json summary = json::parse(slurp(dir / "out" / "sweep.json"));
    CHECK(summary["runs"].size() == 2);
    CHECK(sweep_value(json("0.5pi")) == doctest::Approx(pi / 2));
}
